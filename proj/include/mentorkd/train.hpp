#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mentorkd/dataset.hpp"
#include "mentorkd/model.hpp"
#include "mentorkd/objectives.hpp"

namespace mentorkd {

struct TrainHyperparameters {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    double warmup_fraction = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    long max_steps = 0;  // 0 = epochs * batches per epoch

    void validate() const;
};

// Warmup then cosine decay to zero over `total_steps`.
double learning_rate_at(const TrainHyperparameters& hp, long step, long total_steps);

struct EpochMetrics {
    int epoch = 0;
    double loss_rd = 0.0;
    double loss_sld = 0.0;  // NaN when no soft labels were computed
    double loss_total = 0.0;
    double train_acc = 0.0;  // NaN unless a monitor filled it in
    double eval_acc = 0.0;
};

// Everything needed to continue a run bit-compatibly.
struct TrainState {
    std::vector<std::vector<float>> adam_m;
    std::vector<std::vector<float>> adam_v;
    long step = 0;
    long total_steps = 0;
    int epoch = 0;       // epoch currently in progress (or next to start)
    int next_batch = 0;  // batch index inside `epoch`
    double sum_rd = 0.0, sum_sld = 0.0, sum_total = 0.0;
    int batches_in_epoch = 0;
    std::string dropout_rng;
    std::vector<EpochMetrics> history;

    bool operator==(const TrainState&) const = default;
};

// Soft-label source and weights for student training; an empty objective is
// plain language modelling.
struct Objective {
    const TinyTransformer* mentor = nullptr;
    double lambda = 0.0;
    double temperature = 2.0;
    Ablation ablation = Ablation::NoSLD;
};

struct TrainOptions {
    // Called after each epoch; may fill train_acc / eval_acc.
    std::function<void(const TinyTransformer&, EpochMetrics&)> monitor;
    // Return early once state.step reaches this value (0 = run to the end).
    long stop_at_step = 0;
    // Cache mentor distributions for the whole set when they fit in this many bytes.
    std::size_t soft_label_cache_bytes = std::size_t{768} << 20;
};

// Trains in place. A default-constructed state starts a fresh run; a state
// returned by an interrupted call resumes it.
void train_loop(TinyTransformer& model, const DistillationSet& set, const TrainHyperparameters& hp,
                const Objective& objective, TrainState& state, const TrainOptions& options = {});

struct TrainResult {
    TrainState state;
    std::vector<EpochMetrics> curve;
};

TrainResult train_lm(TinyTransformer& model, const DistillationSet& set, const TrainHyperparameters& hp,
                     const TrainOptions& options = {});

// Writes `epoch, loss_rd, loss_sld, loss_total, train_acc, eval_acc`.
void write_metrics_csv(const std::vector<EpochMetrics>& curve, const std::filesystem::path& path);

}  // namespace mentorkd
