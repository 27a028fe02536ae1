#include "tcmm/train.hpp"

#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "tcmm/blob_io.hpp"
#include "tcmm/rng.hpp"

namespace tcmm {

namespace {

enum Stream : std::uint64_t { kEncoderInit = 1, kSampler = 2 };

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void sgd_step(EncoderParams& params, const EncoderParams& grad, double lr) {
    auto dst = params.matrices();
    auto src = grad.matrices();
    for (std::size_t m = 0; m < dst.size(); ++m) {
        auto& w = dst[m]->data();
        const auto& g = src[m]->data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
}

void accumulate(EncoderParams& acc, const EncoderParams& grad, double scale) {
    auto dst = acc.matrices();
    auto src = grad.matrices();
    for (std::size_t m = 0; m < dst.size(); ++m) axpy(scale, src[m]->data(), dst[m]->data());
}

FeatureRefs rows_of(const Matrix& m, std::span<const std::size_t> idx) {
    FeatureRefs out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(m.row(i));
    return out;
}

nlohmann::json vec_json(std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); }

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("train." + field + ": " + why);
    };
    if (epochs < 0) fail("epochs", "must be >= 0");
    if (batch_size < 1) fail("batch_size", "must be >= 1");
    if (!(lr > 0.0)) fail("lr", "must be > 0");
    if (lr_decay_every < 1) fail("lr_decay_every", "must be >= 1");
    if (!(lr_decay_factor > 0.0)) fail("lr_decay_factor", "must be > 0");
    if (!(tau > 0.0)) fail("tau", "must be > 0");
    if (!(mu >= 0.0 && mu <= 1.0)) fail("mu", "must be in [0, 1]");
    if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha", "must be in (0, 1]");
    if (kappa < 1) fail("kappa", "must be >= 1");
    if (lambda.constraint < 0.0) fail("lambda_con", "must be >= 0");
    if (lambda.prototype < 0.0) fail("lambda_pro", "must be >= 0");
    if (lambda.anchor < 0.0) fail("lambda_an", "must be >= 0");
    if (!(eps > 0.0)) fail("eps", "must be > 0");
    if (min_pts < 1) fail("min_pts", "must be >= 1");
    if (feature_dim < 2) fail("feature_dim", "must be >= 2");
    if (num_parts < 1) fail("num_parts", "must be >= 1");
}

double TrainConfig::learning_rate(int epoch) const {
    return lr * std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
}

nlohmann::json EpochLog::to_json() const {
    return {
        {"epoch", epoch},
        {"mean_constraint", mean_constraint},
        {"mean_proto", mean_proto},
        {"mean_anchor", mean_anchor},
        {"mean_total", mean_total},
        {"C", num_clusters},
        {"outliers", outliers},
        {"lr", lr},
        {"iterations", iterations},
        {"skipped", skipped},
    };
}

std::vector<std::vector<std::size_t>> sample_batches(const PseudoLabels& labels, int batch_size, std::uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("sample_batches: batch size must be >= 1");
    std::vector<std::size_t> clustered;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels.labels[i] >= 0) clustered.push_back(i);
    }
    const auto b = static_cast<std::size_t>(batch_size);
    std::vector<std::vector<std::size_t>> batches;
    if (clustered.size() < b) return batches;
    Rng rng(seed);
    rng.shuffle(std::span(clustered));
    for (std::size_t start = 0; start + b <= clustered.size(); start += b) {
        batches.emplace_back(clustered.begin() + static_cast<std::ptrdiff_t>(start),
                             clustered.begin() + static_cast<std::ptrdiff_t>(start + b));
    }
    return batches;
}

Matrix encode_dataset(const EncoderParams& params, const SynthDataset& ds) {
    Matrix out(ds.size(), params.feature_dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto f = encode(params, ds.samples[i].patches).image_feature;
        std::copy(f.begin(), f.end(), out.row(i).begin());
    }
    return out;
}

std::uint64_t encoder_init_seed(const TrainConfig& config) { return derive_seed(config.seed, kEncoderInit); }

StepStats train_step(EncoderParams& params, const SynthDataset& dataset, const PseudoLabels& labels,
                     InstanceMemory& ins, PrototypeMemory& protos, std::span<const std::size_t> batch,
                     const TrainConfig& config, double lr, int epoch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const auto outlier_mode = config.outlier_negatives ? OutlierNegatives::Include : OutlierNegatives::Exclude;
    EncoderParams grad = params.zeros_like();
    std::vector<FeatureVec> batch_features;
    batch_features.reserve(batch.size());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    StepStats stats;

    for (const std::size_t idx : batch) {
        const auto& patches = dataset.samples[idx].patches;
        const int label = labels.labels[idx];
        if (label < 0) throw std::invalid_argument("train_step: outlier sample used as anchor");
        const EncodeOutput enc = encode(params, patches);
        const auto& f_b = enc.image_feature;

        const auto sel = select_constraint_tokens(f_b, enc.patch_tokens, config.alpha);
        const auto con = constraint_loss(f_b, enc.patch_tokens.row(sel.positive),
                                         rows_of(enc.patch_tokens, sel.negatives), config.tau);
        const auto pro = prototype_loss(f_b, protos, label, config.tau);
        const auto pos = hardest_positive(ins, f_b, label);
        const auto negs = top_k_negatives(ins, f_b, label, config.kappa, outlier_mode);
        const auto an = anchor_loss(f_b, ins.features.row(pos), rows_of(ins.features, negs), config.tau);
        const auto tot = total_loss(con, pro, an, config.lambda);

        if (!std::isfinite(tot.value) || !all_finite(tot.grad_image) || !all_finite(tot.grad_tokens.data())) {
            nlohmann::json diag = {
                {"epoch", epoch},
                {"sample", idx},
                {"label", label},
                {"constraint", con.value},
                {"proto", pro.value},
                {"anchor", an.value},
                {"total", tot.value},
                {"image_feature", vec_json(f_b)},
                {"grad_image", vec_json(tot.grad_image)},
            };
            throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", sample " + std::to_string(idx),
                                std::move(diag));
        }

        Matrix grad_tokens(patches.rows(), params.feature_dim());
        axpy(1.0, tot.grad_tokens.row(0), grad_tokens.row(sel.positive));
        for (std::size_t r = 0; r < sel.negatives.size(); ++r) {
            axpy(1.0, tot.grad_tokens.row(r + 1), grad_tokens.row(sel.negatives[r]));
        }
        accumulate(grad, encode_backward(params, patches, tot.grad_image, grad_tokens), inv_b);

        stats.constraint.push_back(con.value);
        stats.proto.push_back(pro.value);
        stats.anchor.push_back(an.value);
        stats.total.push_back(tot.value);
        batch_features.push_back(f_b);
    }

    // Memory updates see the whole batch only after every loss was computed
    // against the pre-update snapshot.
    for (std::size_t b = 0; b < batch.size(); ++b) {
        momentum_update_prototype(protos, labels.labels[batch[b]], batch_features[b], config.mu);
        momentum_update_instance(ins, batch[b], batch_features[b], config.mu);
    }
    sgd_step(params, grad, lr);
    return stats;
}

TrainResult train(const TrainConfig& config_in, const SynthDataset& dataset, const EpochCallback& on_epoch) {
    if (dataset.size() == 0) throw std::invalid_argument("train: dataset is empty");
    TrainConfig config = config_in;
    config.input_dim = dataset.spec.patch_input_dim;
    config.patches_per_image = dataset.spec.patches_per_image;
    config.validate();
    if (static_cast<std::size_t>(config.batch_size) > dataset.size()) {
        throw std::invalid_argument("train.batch_size: exceeds dataset size");
    }
    if (config.patches_per_image < config.num_parts) {
        throw std::invalid_argument("train.num_parts: more part groups than patches per image");
    }

    TrainResult result;
    result.params = init_params(config.feature_dim, config.input_dim, config.num_parts, encoder_init_seed(config));
    result.initial_params = result.params;
    if (config.epochs == 0) return result;

    auto& params = result.params;
    Matrix features = encode_dataset(params, dataset);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (epoch > 0) features = encode_dataset(params, dataset);
        const PseudoLabels labels = dbscan(features, config.eps, config.min_pts);
        InstanceMemory ins = build_instance_memory(features, labels);

        EpochLog rec;
        rec.epoch = epoch;
        rec.num_clusters = labels.num_clusters;
        rec.outliers = labels.num_outliers();
        rec.lr = config.learning_rate(epoch);

        // A single cluster with no usable outliers leaves the anchor loss without negatives.
        const bool has_negatives =
            labels.num_clusters > 1 || (config.outlier_negatives && rec.outliers > 0);
        const auto batches = labels.num_clusters > 0 && has_negatives
                                 ? sample_batches(labels, config.batch_size, derive_seed(config.seed, kSampler, epoch))
                                 : std::vector<std::vector<std::size_t>>{};
        if (batches.empty()) {
            std::clog << "warning: epoch " << epoch << " skipped: " << labels.num_clusters << " clusters, "
                      << (labels.size() - rec.outliers) << " clustered samples, batch size " << config.batch_size
                      << "\n";
            rec.skipped = true;
            result.instance_memory = std::move(ins);
            result.prototype_memory = {};
            if (on_epoch) on_epoch(rec);
            result.log.push_back(rec);
            continue;
        }
        PrototypeMemory protos = compute_prototypes(ins);

        double sum_con = 0.0, sum_pro = 0.0, sum_an = 0.0, sum_tot = 0.0;
        std::size_t anchors = 0;

        for (const auto& batch : batches) {
            const auto stats = train_step(params, dataset, labels, ins, protos, batch, config, rec.lr, epoch);
            for (std::size_t b = 0; b < batch.size(); ++b) {
                sum_con += stats.constraint[b];
                sum_pro += stats.proto[b];
                sum_an += stats.anchor[b];
                sum_tot += stats.total[b];
            }
            anchors += batch.size();
        }

        const double inv_n = 1.0 / static_cast<double>(anchors);
        rec.mean_constraint = sum_con * inv_n;
        rec.mean_proto = sum_pro * inv_n;
        rec.mean_anchor = sum_an * inv_n;
        rec.mean_total = sum_tot * inv_n;
        rec.iterations = batches.size();
        result.instance_memory = std::move(ins);
        result.prototype_memory = std::move(protos);
        if (on_epoch) on_epoch(rec);
        result.log.push_back(rec);
    }
    return result;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& stem) {
    const auto& p = ckpt.params;
    BlobWriter blob;
    for (const auto* m : p.matrices()) blob.put_f32(m->data());
    blob.put_f32(ckpt.instance_memory.features.data());
    for (int l : ckpt.instance_memory.labels) blob.put_i32(l);
    blob.put_f32(ckpt.prototype_memory.prototypes.data());

    nlohmann::json manifest = {
        {"format_version", 1},
        {"kind", "encoder_checkpoint"},
        {"feature_dim", p.feature_dim()},
        {"input_dim", p.input_dim()},
        {"num_parts", p.num_parts()},
        {"instance_count", ckpt.instance_memory.size()},
        {"prototype_count", ckpt.prototype_memory.size()},
    };
    write_pair(stem, std::move(manifest), blob);
}

Checkpoint read_checkpoint(const std::filesystem::path& stem) {
    auto [m, blob] = read_pair(stem);
    Checkpoint ck;
    try {
        if (m.at("format_version").get<int>() != 1) throw FormatError("unsupported checkpoint format_version");
        const auto d = m.at("feature_dim").get<std::size_t>();
        const auto din = m.at("input_dim").get<std::size_t>();
        const auto z = m.at("num_parts").get<std::size_t>();
        const auto n = m.at("instance_count").get<std::size_t>();
        const auto c = m.at("prototype_count").get<std::size_t>();
        if (d < 2 || din < 1 || z < 1) throw FormatError("checkpoint manifest: invalid dimensions");
        const std::size_t floats = (z + 2) * d * din + n * d + c * d;
        if (blob.remaining() != (floats + n) * 4) {
            throw FormatError("checkpoint blob size does not match manifest dimensions");
        }
        auto read_matrix = [&](std::size_t rows, std::size_t cols) {
            Matrix out(rows, cols);
            for (auto& x : out.data()) x = blob.f32();
            return out;
        };
        ck.params.w_patch = read_matrix(d, din);
        ck.params.w_cls = read_matrix(d, din);
        for (std::size_t k = 0; k < z; ++k) ck.params.w_part.push_back(read_matrix(d, din));
        ck.instance_memory.features = read_matrix(n, d);
        ck.instance_memory.labels.resize(n);
        for (auto& l : ck.instance_memory.labels) l = blob.i32();
        ck.prototype_memory.prototypes = read_matrix(c, d);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
    return ck;
}

}  // namespace tcmm
