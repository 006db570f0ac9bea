#include "latdis/dataset_io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "latdis/binary_io.hpp"
#include "latdis/errors.hpp"

namespace latdis {

namespace {

constexpr std::uint16_t kDatasetVersion = 1;
constexpr char kMagic[4] = {'L', 'D', 'S', 'D'};

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

void write_record(ByteWriter& w, const LabeledSlice& ls, int h, int wd) {
    if (ls.image.height != h || ls.image.width != wd || ls.mask.height != h ||
        ls.mask.width != wd)
        throw DataError("save_dataset: slices must share one geometry");
    w.u32(ls.image.subject);
    w.u16(ls.image.slice_index);
    w.u32(ls.image.lesion_px);
    const std::size_t n = static_cast<std::size_t>(h) * wd;
    std::uint8_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (ls.mask.inside[i]) acc |= std::uint8_t(1u << (i % 8));
        if (i % 8 == 7) {
            w.bytes.push_back(acc);
            acc = 0;
        }
    }
    if (n % 8 != 0) w.bytes.push_back(acc);
    for (float v : ls.image.pixels) w.f32(v);
}

LabeledSlice read_record(ByteReader& r, int h, int wd) {
    LabeledSlice ls;
    ls.image.height = ls.mask.height = h;
    ls.image.width = ls.mask.width = wd;
    ls.image.subject = r.u32();
    ls.image.slice_index = static_cast<std::uint16_t>(r.u16());
    ls.image.lesion_px = r.u32();
    const std::size_t n = static_cast<std::size_t>(h) * wd;
    const std::size_t mask_bytes = (n + 7) / 8;
    r.need(mask_bytes);
    ls.mask.inside.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ls.mask.inside[i] = (r.bytes[r.pos + i / 8] >> (i % 8)) & 1;
    r.pos += mask_bytes;
    ls.image.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) ls.image.pixels[i] = r.f32();
    return ls;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    static const auto table = make_crc_table();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::uint8_t b : bytes) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void atomic_write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot open '" + tmp + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            std::remove(tmp.c_str());
            throw DataError("write to '" + tmp + "' failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::remove(tmp.c_str());
        throw DataError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

void atomic_write_file(const std::string& path, const std::string& text) {
    atomic_write_file(path, std::span<const std::uint8_t>(
                                reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> serialize_dataset(const DatasetSplit& split) {
    const LabeledSlice* first = !split.train.empty()        ? &split.train.front()
                                : !split.validation.empty() ? &split.validation.front()
                                : !split.test.empty()       ? &split.test.front()
                                                            : nullptr;
    if (!first) throw DataError("save_dataset: empty dataset");
    const int h = first->image.height, wd = first->image.width;

    ByteWriter w;
    w.raw(reinterpret_cast<const std::uint8_t*>(kMagic), 4);
    w.u16(kDatasetVersion);
    w.u16(static_cast<std::uint16_t>(h));
    w.u16(static_cast<std::uint16_t>(wd));
    w.u32(static_cast<std::uint32_t>(split.train.size()));
    w.u32(static_cast<std::uint32_t>(split.validation.size()));
    w.u32(static_cast<std::uint32_t>(split.test.size()));
    for (const auto& ls : split.train) write_record(w, ls, h, wd);
    for (const auto& ls : split.validation) write_record(w, ls, h, wd);
    for (const auto& ls : split.test) write_record(w, ls, h, wd);
    w.u32(crc32(w.bytes));
    return std::move(w.bytes);
}

DatasetSplit parse_dataset(std::span<const std::uint8_t> bytes, const std::string& origin) {
    constexpr std::size_t kHeaderSize = 22;  // magic 4 + version 2 + extents 4 + counts 12
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(origin + ": bad magic, not a dataset file");
    if (bytes.size() < kHeaderSize + 4) throw TruncationError(origin + ": header truncated");

    ByteReader r{bytes, 4, origin};
    const std::uint16_t version = r.u16();
    if (version != kDatasetVersion)
        throw FormatError(origin + ": unsupported dataset version " + std::to_string(version));
    const int h = r.u16(), wd = r.u16();
    const std::uint64_t n_train = r.u32(), n_val = r.u32(), n_test = r.u32();

    const std::uint64_t n_px = static_cast<std::uint64_t>(h) * wd;
    const std::uint64_t record_size = 4 + 2 + 4 + (n_px + 7) / 8 + 4 * n_px;
    const std::uint64_t expected = kHeaderSize + (n_train + n_val + n_test) * record_size + 4;
    if (bytes.size() < expected)
        throw TruncationError(origin + ": truncated, expected " + std::to_string(expected) +
                              " bytes but file has " + std::to_string(bytes.size()));
    if (bytes.size() > expected)
        throw FormatError(origin + ": trailing bytes after the last record");

    const std::uint32_t stored = std::uint32_t(bytes[bytes.size() - 4]) |
                                 std::uint32_t(bytes[bytes.size() - 3]) << 8 |
                                 std::uint32_t(bytes[bytes.size() - 2]) << 16 |
                                 std::uint32_t(bytes[bytes.size() - 1]) << 24;
    if (crc32(bytes.subspan(0, bytes.size() - 4)) != stored)
        throw ChecksumError(origin + ": CRC-32 mismatch, file is corrupted");

    r.bytes = bytes.subspan(0, bytes.size() - 4);
    DatasetSplit split;
    split.train.reserve(n_train);
    split.validation.reserve(n_val);
    split.test.reserve(n_test);
    for (std::uint64_t i = 0; i < n_train; ++i) split.train.push_back(read_record(r, h, wd));
    for (std::uint64_t i = 0; i < n_val; ++i) split.validation.push_back(read_record(r, h, wd));
    for (std::uint64_t i = 0; i < n_test; ++i) split.test.push_back(read_record(r, h, wd));
    return split;
}

void save_dataset(const DatasetSplit& split, const std::string& path) {
    atomic_write_file(path, serialize_dataset(split));
}

DatasetSplit load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_dataset(bytes, path);
}

}  // namespace latdis
