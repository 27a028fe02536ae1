#include "tcmm/config.hpp"

#include <set>

#include "tcmm/blob_io.hpp"

namespace tcmm {

namespace {

using nlohmann::json;

// Reads one object section and remembers which keys were consumed so the
// leftovers can be rejected.
class Section {
public:
    Section(const json& parent, const std::string& key, const std::string& prefix) : path_(prefix + key) {
        if (!parent.contains(key)) throw ConfigError(path_, "missing section");
        node_ = &parent.at(key);
        if (!node_->is_object()) throw ConfigError(path_, "must be an object");
    }
    explicit Section(const json& root) : path_(""), node_(&root) {
        if (!root.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    }

    template <typename T>
    T required(const std::string& key) {
        if (!node_->contains(key)) throw ConfigError(field(key), "required field missing");
        return get<T>(key);
    }

    template <typename T>
    T optional(const std::string& key, T fallback) {
        if (!node_->contains(key)) return fallback;
        return get<T>(key);
    }

    bool has(const std::string& key) const { return node_->contains(key); }

    void finish() const {
        for (const auto& [k, _] : node_->items()) {
            if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
        }
    }

    void allow(const std::string& key) { seen_.insert(key); }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    template <typename T>
    T get(const std::string& key) {
        seen_.insert(key);
        const json& v = node_->at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(field(key), "must be a boolean");
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError(field(key), "must be a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(field(key), "must be an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(field(key), "must be a number");
        } else {
            if (!v.is_string()) throw ConfigError(field(key), "must be a string");
        }
        return v.get<T>();
    }

    std::string path_;
    const json* node_ = nullptr;
    std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

// Validators report "train.kappa: ..." style messages; recover the field.
ConfigError rethrow_as_config(const std::invalid_argument& e, const std::string& fallback) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    if (colon == std::string::npos) return ConfigError(fallback, msg);
    return ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    Section root(doc);
    if (!doc.contains("format_version")) throw ConfigError("format_version", "required field missing");
    if (root.required<int>("format_version") != 1) throw ConfigError("format_version", "must be 1");

    {
        Section s(doc, "data", "");
        auto& d = cfg.data;
        d.num_identities = s.required<int>("num_identities");
        d.samples_per_identity = s.required<int>("samples_per_identity");
        d.patches_per_image = s.required<int>("patches_per_image");
        d.patch_input_dim = s.required<int>("patch_input_dim");
        d.identity_spread = s.required<double>("identity_spread");
        d.noise_patch_prob = s.required<double>("noise_patch_prob");
        d.seed = s.required<std::uint64_t>("seed");
        s.finish();
        try {
            d.validate();
        } catch (const SpecError& e) {
            const auto r = rethrow_as_config(e, "");
            throw ConfigError("data." + r.field(), r.message());
        }
    }
    {
        Section s(doc, "train", "");
        auto& t = cfg.train;
        t.epochs = s.optional<int>("epochs", t.epochs);
        t.batch_size = s.optional<int>("batch_size", t.batch_size);
        t.lr = s.optional<double>("lr", t.lr);
        t.lr_decay_every = s.optional<int>("lr_decay_every", t.lr_decay_every);
        t.lr_decay_factor = s.optional<double>("lr_decay_factor", t.lr_decay_factor);
        t.tau = s.optional<double>("tau", t.tau);
        t.mu = s.optional<double>("mu", t.mu);
        t.alpha = s.optional<double>("alpha", t.alpha);
        t.kappa = s.optional<int>("kappa", t.kappa);
        t.lambda.constraint = s.optional<double>("lambda_con", t.lambda.constraint);
        t.lambda.prototype = s.optional<double>("lambda_pro", t.lambda.prototype);
        t.lambda.anchor = s.optional<double>("lambda_an", t.lambda.anchor);
        t.eps = s.optional<double>("eps", t.eps);
        t.min_pts = s.optional<int>("min_pts", t.min_pts);
        t.outlier_negatives = s.optional<bool>("outlier_negatives", t.outlier_negatives);
        t.seed = s.optional<std::uint64_t>("seed", t.seed);
        t.feature_dim = s.optional<int>("feature_dim", t.feature_dim);
        t.num_parts = s.optional<int>("num_parts", t.num_parts);
        s.finish();
        t.input_dim = cfg.data.patch_input_dim;
        t.patches_per_image = cfg.data.patches_per_image;
        try {
            t.validate();
        } catch (const std::invalid_argument& e) {
            throw rethrow_as_config(e, "train");
        }
        const auto n = static_cast<long long>(cfg.data.num_identities) * cfg.data.samples_per_identity;
        if (t.batch_size > n) throw ConfigError("train.batch_size", "exceeds dataset size " + std::to_string(n));
        if (t.num_parts > cfg.data.patches_per_image) {
            throw ConfigError("train.num_parts", "exceeds data.patches_per_image");
        }
    }
    if (doc.contains("eval")) {
        Section s(doc, "eval", "");
        auto& e = cfg.eval;
        e.query_per_identity = s.optional<int>("query_per_identity", e.query_per_identity);
        e.k_max = s.optional<int>("k_max", e.k_max);
        e.seed = s.optional<std::uint64_t>("seed", e.seed);
        s.finish();
    }
    root.allow("eval");
    if (cfg.eval.query_per_identity < 1 || cfg.eval.query_per_identity >= cfg.data.samples_per_identity) {
        throw ConfigError("eval.query_per_identity", "must be in [1, data.samples_per_identity)");
    }
    {
        const long long gallery = static_cast<long long>(cfg.data.num_identities) *
                                  (cfg.data.samples_per_identity - cfg.eval.query_per_identity);
        if (cfg.eval.k_max < 1 || cfg.eval.k_max > gallery) {
            throw ConfigError("eval.k_max", "must be in [1, gallery size " + std::to_string(gallery) + "]");
        }
    }
    {
        Section s(doc, "paths", "");
        auto& p = cfg.paths;
        p.dataset = resolve(base_dir, s.required<std::string>("dataset"));
        p.checkpoint = resolve(base_dir, s.required<std::string>("checkpoint"));
        p.log = resolve(base_dir, s.required<std::string>("log"));
        p.metrics = resolve(base_dir, s.required<std::string>("metrics"));
        if (s.has("per_query_csv")) p.per_query_csv = resolve(base_dir, s.required<std::string>("per_query_csv"));
        s.finish();
    }
    root.allow("data");
    root.allow("train");
    root.allow("paths");
    root.finish();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = read_json(path);
    } catch (const FormatError& e) {
        throw ConfigError("<file>", e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

json to_json(const RunConfig& cfg) {
    const auto& d = cfg.data;
    const auto& t = cfg.train;
    json paths = {
        {"dataset", cfg.paths.dataset.string()},
        {"checkpoint", cfg.paths.checkpoint.string()},
        {"log", cfg.paths.log.string()},
        {"metrics", cfg.paths.metrics.string()},
    };
    if (cfg.paths.per_query_csv) paths["per_query_csv"] = cfg.paths.per_query_csv->string();
    return {
        {"format_version", 1},
        {"data",
         {{"num_identities", d.num_identities},
          {"samples_per_identity", d.samples_per_identity},
          {"patches_per_image", d.patches_per_image},
          {"patch_input_dim", d.patch_input_dim},
          {"identity_spread", d.identity_spread},
          {"noise_patch_prob", d.noise_patch_prob},
          {"seed", d.seed}}},
        {"train",
         {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr", t.lr},
          {"lr_decay_every", t.lr_decay_every},
          {"lr_decay_factor", t.lr_decay_factor},
          {"tau", t.tau},
          {"mu", t.mu},
          {"alpha", t.alpha},
          {"kappa", t.kappa},
          {"lambda_con", t.lambda.constraint},
          {"lambda_pro", t.lambda.prototype},
          {"lambda_an", t.lambda.anchor},
          {"eps", t.eps},
          {"min_pts", t.min_pts},
          {"outlier_negatives", t.outlier_negatives},
          {"seed", t.seed},
          {"feature_dim", t.feature_dim},
          {"num_parts", t.num_parts}}},
        {"eval", {{"query_per_identity", cfg.eval.query_per_identity}, {"k_max", cfg.eval.k_max}, {"seed", cfg.eval.seed}}},
        {"paths", paths},
    };
}

}  // namespace tcmm
