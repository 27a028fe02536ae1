#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcmm/cluster.hpp"
#include "tcmm/encoder.hpp"
#include "tcmm/loss.hpp"
#include "tcmm/memory.hpp"
#include "tcmm/synth.hpp"

namespace tcmm {

/// Defaults follow the published full-scale recipe; desk-scale runs
/// override epochs, batch size, learning rate and dimensions.
struct TrainConfig {
    int epochs = 80;
    int batch_size = 512;
    double lr = 3.5e-4;
    int lr_decay_every = 20;
    double lr_decay_factor = 0.1;
    double tau = 0.05;
    double mu = 0.2;
    double alpha = 0.075;
    int kappa = 4;
    LossWeights lambda;
    double eps = 0.5;
    int min_pts = 4;
    bool outlier_negatives = true;  // outliers are anchor-loss negative candidates
    std::uint64_t seed = 0;
    int feature_dim = 32;
    int num_parts = 3;
    // Taken from the dataset when training; kept here so a config fully
    // describes the encoder shape.
    int input_dim = 0;
    int patches_per_image = 0;

    /// Throws std::invalid_argument naming the field.
    void validate() const;

    /// lr * factor^floor(epoch / every), epoch counted from 0.
    double learning_rate(int epoch) const;
};

struct EpochLog {
    int epoch = 0;
    double mean_constraint = 0.0;
    double mean_proto = 0.0;
    double mean_anchor = 0.0;
    double mean_total = 0.0;
    int num_clusters = 0;
    std::size_t outliers = 0;
    double lr = 0.0;
    std::size_t iterations = 0;
    bool skipped = false;

    nlohmann::json to_json() const;
};

/// Raised when a loss or gradient turns non-finite; carries a diagnostic dump.
class NonFiniteLoss : public NumericError {
public:
    NonFiniteLoss(const std::string& what, nlohmann::json diagnostics)
        : NumericError(what), diagnostics_(std::move(diagnostics)) {}
    const nlohmann::json& diagnostics() const { return diagnostics_; }

private:
    nlohmann::json diagnostics_;
};

/// Shuffles the clustered (label >= 0) indices and cuts floor(n / B) full
/// batches. Empty when fewer than B samples are clustered.
std::vector<std::vector<std::size_t>> sample_batches(const PseudoLabels& labels, int batch_size, std::uint64_t seed);

/// Encodes every sample; returns the N x D matrix of image features.
Matrix encode_dataset(const EncoderParams& params, const SynthDataset& ds);

/// Per-sample loss values of one iteration, in batch order.
struct StepStats {
    std::vector<double> constraint;
    std::vector<double> proto;
    std::vector<double> anchor;
    std::vector<double> total;
};

/// One iteration: encode the batch, evaluate all three losses against the
/// current memory snapshot, then apply the momentum updates (ascending batch
/// order) and one SGD step on the batch-mean gradient.
StepStats train_step(EncoderParams& params, const SynthDataset& dataset, const PseudoLabels& labels,
                     InstanceMemory& instance_memory, PrototypeMemory& prototype_memory,
                     std::span<const std::size_t> batch, const TrainConfig& config, double lr, int epoch = 0);

struct TrainResult {
    EncoderParams initial_params;
    EncoderParams params;
    std::vector<EpochLog> log;
    /// Banks as they stood at the end of the last trained epoch.
    InstanceMemory instance_memory;
    PrototypeMemory prototype_memory;
};

/// Called after every epoch (including skipped ones), in order.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Runs the full token-constraint / multi-scale-memory training loop.
TrainResult train(const TrainConfig& config, const SynthDataset& dataset, const EpochCallback& on_epoch = {});

/// Seed of the fresh encoder used by train(); exposed so evaluation can
/// rebuild the untrained baseline.
std::uint64_t encoder_init_seed(const TrainConfig& config);

struct Checkpoint {
    EncoderParams params;
    InstanceMemory instance_memory;
    PrototypeMemory prototype_memory;
};

/// `<stem>.json` + `<stem>.f32`: the encoder matrices in declaration order
/// (w_patch, w_cls, w_part...), each row-major; then instance features,
/// instance labels (int32) and prototypes. Memory sections may be empty.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& stem);
Checkpoint read_checkpoint(const std::filesystem::path& stem);

}  // namespace tcmm
