#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latdis/vae.hpp"

namespace latdis {

struct CheckpointMeta {
    std::uint32_t epochs_run = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
};

// Model checkpoint, little-endian:
//   magic "VAEC" | version u16
//   | architecture: input extent u32, encoder channel list, latent u32,
//     covariance u8, clip f64, variance floor f64
//   | parameter blocks (rank u16, extents u32 each, f32 data)
//   | metadata (epochs u32, final loss f64, seed u64)
//   | crc32 of all preceding bytes.
// load(save(m)) reproduces the model bit-exactly; version mismatches and
// corruption are rejected.
void save_checkpoint(const VaeModel& model, const CheckpointMeta& meta, const std::string& path);
std::pair<VaeModel, CheckpointMeta> load_checkpoint(const std::string& path);

std::vector<std::uint8_t> serialize_checkpoint(const VaeModel& model, const CheckpointMeta& meta);
std::pair<VaeModel, CheckpointMeta> parse_checkpoint(std::span<const std::uint8_t> bytes,
                                                     const std::string& origin);

}  // namespace latdis
