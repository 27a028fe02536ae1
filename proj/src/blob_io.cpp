#include "tcmm/blob_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace tcmm {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t u) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

}  // namespace

void BlobWriter::put_f32(double v) { put_u32(bytes_, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

void BlobWriter::put_f32(std::span<const double> vs) {
    for (double v : vs) put_f32(v);
}

void BlobWriter::put_i32(std::int32_t v) { put_u32(bytes_, static_cast<std::uint32_t>(v)); }

double BlobReader::f32() {
    if (remaining() < 4) throw FormatError("blob truncated");
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return static_cast<double>(std::bit_cast<float>(u));
}

std::int32_t BlobReader::i32() {
    if (remaining() < 4) throw FormatError("blob truncated");
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return static_cast<std::int32_t>(u);
}

FilePair file_pair(const std::filesystem::path& stem) {
    auto m = stem;
    auto b = stem;
    m += ".json";
    b += ".f32";
    return {m, b};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    const std::string text = doc.dump(2) + "\n";
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_pair(const std::filesystem::path& stem, nlohmann::json manifest, const BlobWriter& blob) {
    const auto files = file_pair(stem);
    manifest["blob_bytes"] = blob.bytes().size();
    write_bytes(files.blob, blob.bytes());
    write_json(files.manifest, manifest);
}

std::pair<nlohmann::json, BlobReader> read_pair(const std::filesystem::path& stem) {
    const auto files = file_pair(stem);
    auto manifest = read_json(files.manifest);
    auto bytes = read_bytes(files.blob);
    if (!manifest.contains("blob_bytes") || !manifest["blob_bytes"].is_number_unsigned()) {
        throw FormatError(files.manifest.string() + ": missing blob_bytes");
    }
    const auto expected = manifest["blob_bytes"].get<std::uint64_t>();
    if (expected != bytes.size()) {
        throw FormatError("blob length mismatch: manifest " + files.manifest.string() + " says " +
                          std::to_string(expected) + " bytes, blob " + files.blob.string() + " has " +
                          std::to_string(bytes.size()));
    }
    return {std::move(manifest), BlobReader(std::move(bytes))};
}

}  // namespace tcmm
