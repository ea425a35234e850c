#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "mentorkd/config.hpp"
#include "mentorkd/distill.hpp"
#include "mentorkd/eval.hpp"

namespace mentorkd {

// ---- seeded stages shared by the CLI and the sweep runners ----

// Every seeded stage draws from its own stream derived from the run seed.
struct StageSeeds {
    std::uint64_t data, teacher, fraction, mentor_init, mentor_train, augment, student_init, student_train;
};
StageSeeds stage_seeds(std::uint64_t seed);

DatasetSplits make_splits(const RunConfig& config, std::uint64_t seed);

// Oracle or remote teacher, depending on config.teacher_kind. Remote failures
// are reported on `failures` and otherwise skipped.
std::vector<CoTAnnotation> annotate_teacher(const RunConfig& config, std::span<const TaskInstance> instances,
                                            std::uint64_t seed, std::vector<RemoteFailure>* failures = nullptr);

// The ceil(fraction * Q) training questions kept in a low-resource run.
std::vector<QuestionRecord> select_fraction(std::span<const QuestionRecord> records, double fraction, std::uint64_t seed);

// filter + reformat over the annotations whose question is in `records`.
DistillationSet build_teacher_set(const RunConfig& config, std::span<const CoTAnnotation> annotations,
                                  std::span<const QuestionRecord> records);

TinyTransformer make_model(const std::string& preset, TaskKind task, ModelRole role, std::uint64_t seed);

TrainHyperparameters mentor_schedule(const RunConfig& config, std::uint64_t seed);
// With student_steps > 0 the run is a fixed number of optimizer steps whatever the set size.
TrainHyperparameters student_schedule(const RunConfig& config, std::size_t set_size, std::uint64_t seed);

// Fills eval_acc (and train_acc on a probe of the training questions) at the
// end of epochs spaced at least eval.interval_steps apart, and always on the last one.
TrainOptions accuracy_monitor(const RunConfig& config, const TrainHyperparameters& hp, std::size_t set_size,
                              std::vector<QuestionRecord> test, std::vector<QuestionRecord> train_probe);

double final_accuracy(const std::vector<EpochMetrics>& curve);
double best_accuracy(const std::vector<EpochMetrics>& curve);

// ---- sweep cells ----

struct CellSpec {
    std::string label;
    std::string arm;
    double x = 0.0;
    double fraction = 1.0;
    int degree = 3;  // 0 = teacher-only training data
    double lambda = 0.3;
    Ablation ablation = Ablation::Full;
    std::string mentor_preset = "student";

    // Identity of the computation (label/arm/x excluded).
    std::string key() const;
};

struct CellOutcome {
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
    std::size_t train_size = 0;
    std::vector<EpochMetrics> curve;
};

// Memoizes the expensive intermediate artifacts (splits, annotations, mentors,
// augmented sets, finished cells) so overlapping sweeps share work. Safe to use
// from several workers.
class SweepContext {
public:
    explicit SweepContext(RunConfig config);

    const RunConfig& config() const { return config_; }

    const DatasetSplits& splits(std::uint64_t seed);
    const std::vector<CoTAnnotation>& teacher_annotations(std::uint64_t seed);
    const std::vector<QuestionRecord>& pool(std::uint64_t seed, double fraction);
    const DistillationSet& teacher_set(std::uint64_t seed, double fraction);
    const TinyTransformer& mentor(std::uint64_t seed, double fraction, const std::string& preset);
    const DistillationSet& mentor_set(std::uint64_t seed, double fraction, const std::string& preset, int degree);
    const CellOutcome& cell(const CellSpec& spec, std::uint64_t seed);

    // Held-out accuracy of every mentor trained so far, keyed "seed=..,fraction=..,preset=..".
    std::map<std::string, double> mentor_accuracies() const;

    std::function<void(const std::string&)> log;

private:
    template <class V>
    const V& memo(std::map<std::string, std::shared_ptr<V>>& store, const std::string& key,
                  const std::function<V()>& make);

    void note(const std::string& msg);

    RunConfig config_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
    std::map<std::string, std::shared_ptr<DatasetSplits>> splits_;
    std::map<std::string, std::shared_ptr<std::vector<CoTAnnotation>>> annotations_;
    std::map<std::string, std::shared_ptr<std::vector<QuestionRecord>>> pools_;
    std::map<std::string, std::shared_ptr<DistillationSet>> teacher_sets_;
    std::map<std::string, std::shared_ptr<TinyTransformer>> mentors_;
    std::map<std::string, std::shared_ptr<DistillationSet>> mentor_sets_;
    std::map<std::string, std::shared_ptr<CellOutcome>> cells_;
    std::map<std::string, double> mentor_accuracy_;
};

CellOutcome run_cell(SweepContext& context, const CellSpec& spec, std::uint64_t seed);

// ---- sweep results ----

struct SweepCell {
    std::string label;
    std::string arm;
    double x = 0.0;
    std::vector<double> final_accuracy;  // one per seed, in seed order
    std::vector<double> best_accuracy;
    double mean = 0.0, stddev = 0.0;
    double best_mean = 0.0, best_stddev = 0.0;

    bool operator==(const SweepCell&) const = default;
};

struct SweepResult {
    std::string experiment;
    std::string axis;
    std::vector<std::uint64_t> seeds;
    std::vector<SweepCell> cells;

    const SweepCell& cell(std::string_view label) const;
    bool operator==(const SweepResult&) const = default;
};

// Sample mean and standard deviation (n - 1 denominator; 0 for a single value).
std::pair<double, double> mean_and_stddev(const std::vector<double>& values);

std::vector<std::string> experiment_names();

std::vector<CellSpec> ablation_cells(const RunConfig& config);
std::vector<CellSpec> degree_cells(const RunConfig& config);
std::vector<CellSpec> lowresource_cells(const RunConfig& config);
std::vector<CellSpec> mentorsize_cells(const RunConfig& config);
std::vector<CellSpec> lambda_cells(const RunConfig& config);

// Runs every cell over config.sweep.seeds (sweep.workers at a time).
SweepResult run_cells(SweepContext& context, const std::string& experiment, const std::string& axis,
                      const std::vector<CellSpec>& cells);

SweepResult run_ablation(SweepContext& context);
SweepResult run_degree_sweep(SweepContext& context);
SweepResult run_lowresource_sweep(SweepContext& context);
SweepResult run_mentorsize_sweep(SweepContext& context);
SweepResult run_lambda_sweep(SweepContext& context);
SweepResult run_experiment(SweepContext& context, const std::string& name);

inline constexpr std::string_view kSweepCsvHeader =
    "experiment,axis,label,arm,x,seeds,final_accuracy,best_accuracy,mean,stddev,best_mean,best_stddev";

void save_sweep_csv(const SweepResult& result, const std::filesystem::path& path);
// Recomputes every mean and deviation from the stored per-seed values and rejects mismatches.
SweepResult load_sweep_csv(const std::filesystem::path& path);

// `arm,label,x,y,sigma` rows (y = mean final accuracy).
std::string plot_data(const SweepResult& result);

}  // namespace mentorkd
