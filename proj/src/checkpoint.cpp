#include "latdis/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "latdis/binary_io.hpp"
#include "latdis/dataset_io.hpp"

namespace latdis {

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;
constexpr char kMagic[4] = {'V', 'A', 'E', 'C'};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const VaeModel& model, const CheckpointMeta& meta) {
    ByteWriter w;
    w.raw(reinterpret_cast<const std::uint8_t*>(kMagic), 4);
    w.u16(kCheckpointVersion);

    const VaeArch& arch = model.arch;
    w.u32(static_cast<std::uint32_t>(arch.input_extent));
    w.u16(static_cast<std::uint16_t>(arch.encoder_channels.size()));
    for (int c : arch.encoder_channels) w.u32(static_cast<std::uint32_t>(c));
    w.u32(static_cast<std::uint32_t>(arch.latent_dim));
    w.bytes.push_back(arch.covariance == Covariance::PerPixel ? 1 : 0);
    w.f64(arch.mean_clip);
    w.f64(arch.variance_floor);

    auto blocks = model.parameters();
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& blk : blocks) {
        w.u16(static_cast<std::uint16_t>(blk.tensor->shape.size()));
        for (int e : blk.tensor->shape) w.u32(static_cast<std::uint32_t>(e));
        for (float v : blk.tensor->data) w.f32(v);
    }

    w.u32(meta.epochs_run);
    w.f64(meta.final_loss);
    w.u64(meta.seed);
    w.u32(crc32(w.bytes));
    return std::move(w.bytes);
}

std::pair<VaeModel, CheckpointMeta> parse_checkpoint(std::span<const std::uint8_t> bytes,
                                                     const std::string& origin) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(origin + ": bad magic, not a checkpoint file");
    if (bytes.size() < 32) throw TruncationError(origin + ": checkpoint header truncated");

    const std::uint32_t stored = std::uint32_t(bytes[bytes.size() - 4]) |
                                 std::uint32_t(bytes[bytes.size() - 3]) << 8 |
                                 std::uint32_t(bytes[bytes.size() - 2]) << 16 |
                                 std::uint32_t(bytes[bytes.size() - 1]) << 24;
    if (crc32(bytes.subspan(0, bytes.size() - 4)) != stored)
        throw ChecksumError(origin + ": CRC-32 mismatch, checkpoint is corrupted");

    ByteReader r{bytes.subspan(0, bytes.size() - 4), 4, origin};
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw FormatError(origin + ": unsupported checkpoint version " +
                          std::to_string(version));

    VaeArch arch;
    arch.input_extent = static_cast<int>(r.u32());
    const std::uint16_t n_layers = r.u16();
    arch.encoder_channels.clear();
    for (std::uint16_t i = 0; i < n_layers; ++i)
        arch.encoder_channels.push_back(static_cast<int>(r.u32()));
    arch.latent_dim = static_cast<int>(r.u32());
    r.need(1);
    arch.covariance = r.bytes[r.pos++] ? Covariance::PerPixel : Covariance::Scalar;
    arch.mean_clip = r.f64();
    arch.variance_floor = r.f64();

    VaeModel model = VaeModel::create(arch, 0);
    auto blocks = model.parameters();
    const std::uint32_t n_blocks = r.u32();
    if (n_blocks != blocks.size())
        throw FormatError(origin + ": checkpoint has " + std::to_string(n_blocks) +
                          " parameter blocks, architecture expects " +
                          std::to_string(blocks.size()));
    for (auto& blk : blocks) {
        const std::uint16_t rank = r.u16();
        std::vector<int> shape(rank);
        for (auto& e : shape) e = static_cast<int>(r.u32());
        if (shape != blk.tensor->shape)
            throw FormatError(origin + ": shape mismatch in block '" + blk.name + "', stored " +
                              shape_string(shape) + " expected " +
                              shape_string(blk.tensor->shape));
        for (auto& v : blk.tensor->data) v = r.f32();
    }

    CheckpointMeta meta;
    meta.epochs_run = r.u32();
    meta.final_loss = r.f64();
    meta.seed = r.u64();
    if (r.pos != r.bytes.size())
        throw FormatError(origin + ": trailing bytes after checkpoint metadata");
    return {std::move(model), meta};
}

void save_checkpoint(const VaeModel& model, const CheckpointMeta& meta, const std::string& path) {
    atomic_write_file(path, serialize_checkpoint(model, meta));
}

std::pair<VaeModel, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes, path);
}

}  // namespace latdis
