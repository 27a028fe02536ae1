#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tcmm {

/// Malformed or missing files, and manifest/blob disagreements.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian float32/int32 encoder. Values are appended in call order.
class BlobWriter {
public:
    void put_f32(double v);
    void put_f32(std::span<const double> vs);
    void put_i32(std::int32_t v);

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class BlobReader {
public:
    explicit BlobReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

    double f32();
    std::int32_t i32();
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

/// `<stem>.json` and `<stem>.f32`.
struct FilePair {
    std::filesystem::path manifest;
    std::filesystem::path blob;
};
FilePair file_pair(const std::filesystem::path& stem);

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// Writes manifest (with "blob_bytes" filled in) and blob.
void write_pair(const std::filesystem::path& stem, nlohmann::json manifest, const BlobWriter& blob);

/// Reads both files and checks the blob length against the manifest's "blob_bytes".
std::pair<nlohmann::json, BlobReader> read_pair(const std::filesystem::path& stem);

}  // namespace tcmm
