#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tcmm/synth.hpp"
#include "tcmm/train.hpp"

namespace tcmm {

/// Config validation failure; field() is the dotted path, e.g. "data.seed".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)), message_(message) {}
    const std::string& field() const { return field_; }
    const std::string& message() const { return message_; }

private:
    std::string field_;
    std::string message_;
};

struct EvalConfig {
    int query_per_identity = 3;
    int k_max = 10;
    std::uint64_t seed = 0;
};

/// Relative paths resolve against the directory holding the config file.
struct PathsConfig {
    std::filesystem::path dataset;     // stem: <dataset>.json + <dataset>.f32
    std::filesystem::path checkpoint;  // stem: <checkpoint>.json + <checkpoint>.f32
    std::filesystem::path log;         // JSON-lines, one record per epoch
    std::filesystem::path metrics;     // metrics JSON
    std::optional<std::filesystem::path> per_query_csv;
};

struct RunConfig {
    SynthSpec data;
    TrainConfig train;
    EvalConfig eval;
    PathsConfig paths;
};

/// Strict parse: unknown keys, wrong types, missing required fields and
/// out-of-range values all raise ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

RunConfig load_run_config(const std::filesystem::path& path);

/// The inverse of parse_run_config (paths written as given).
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace tcmm
