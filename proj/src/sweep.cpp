#include "mentorkd/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <omp.h>

#include "mentorkd/error.hpp"

namespace mentorkd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string fraction_key(std::uint64_t seed, double fraction) {
    return "seed=" + std::to_string(seed) + ",fraction=" + fmt(fraction);
}

}  // namespace

StageSeeds stage_seeds(std::uint64_t seed) {
    const auto d = [seed](std::string_view tag) { return derive_seed(seed, {tag_of(tag)}); };
    return {d("data"),        d("teacher"), d("fraction"),     d("mentor-init"), d("mentor-train"),
            d("augment"),     d("student-init"), d("student-train")};
}

DatasetSplits make_splits(const RunConfig& config, std::uint64_t seed) {
    return generate_splits(config.data.task, config.data.train_size, config.data.test_size,
                           derive_seed(config.data.seed, {stage_seeds(seed).data}), config.data.difficulty);
}

std::vector<CoTAnnotation> annotate_teacher(const RunConfig& config, std::span<const TaskInstance> instances,
                                            std::uint64_t seed, std::vector<RemoteFailure>* failures) {
    if (config.teacher_kind == "remote") {
        const auto records = records_of(instances);
        auto result = annotate_remote(records, config.remote);
        if (failures != nullptr) {
            *failures = std::move(result.failures);
        }
        return std::move(result.annotations);
    }
    TeacherConfig tc = config.teacher;
    tc.seed = stage_seeds(seed).teacher;
    return annotate_oracle(instances, tc);
}

std::vector<QuestionRecord> select_fraction(std::span<const QuestionRecord> records, double fraction,
                                            std::uint64_t seed) {
    // one placeholder example per question so the dataset-level sampler decides
    DistillationSet all;
    for (const auto& r : records) {
        all.examples.push_back({r.id, r.question, "", r.gold_answer, AnnotationSource::Teacher});
    }
    const auto kept = question_ids(subsample_fraction(all, fraction, stage_seeds(seed).fraction));
    const std::unordered_set<std::int64_t> ids(kept.begin(), kept.end());
    std::vector<QuestionRecord> out;
    for (const auto& r : records) {
        if (ids.contains(r.id)) {
            out.push_back(r);
        }
    }
    return out;
}

DistillationSet build_teacher_set(const RunConfig& config, std::span<const CoTAnnotation> annotations,
                                  std::span<const QuestionRecord> records) {
    std::unordered_set<std::int64_t> ids;
    for (const auto& r : records) {
        ids.insert(r.id);
    }
    std::vector<CoTAnnotation> mine;
    for (const auto& a : annotations) {
        if (ids.contains(a.question_id)) {
            mine.push_back(a);
        }
    }
    return reformat(filter_annotations(mine, records), records, config.label_template);
}

TinyTransformer make_model(const std::string& preset, TaskKind task, ModelRole role, std::uint64_t seed) {
    return TinyTransformer(ModelConfig::preset(preset), Tokenizer::for_task(task), role, seed);
}

TrainHyperparameters mentor_schedule(const RunConfig& config, std::uint64_t seed) {
    TrainHyperparameters hp = config.mentor_train;
    hp.seed = stage_seeds(seed).mentor_train;
    return hp;
}

TrainHyperparameters student_schedule(const RunConfig& config, std::size_t set_size, std::uint64_t seed) {
    TrainHyperparameters hp = config.student.train;
    hp.seed = stage_seeds(seed).student_train;
    if (config.student_steps > 0 && set_size > 0) {
        const long batches = static_cast<long>((set_size + static_cast<std::size_t>(hp.batch_size) - 1) /
                                               static_cast<std::size_t>(hp.batch_size));
        hp.epochs = static_cast<int>((config.student_steps + batches - 1) / batches);
        hp.max_steps = config.student_steps;
    }
    return hp;
}

TrainOptions accuracy_monitor(const RunConfig& config, const TrainHyperparameters& hp, std::size_t set_size,
                              std::vector<QuestionRecord> test, std::vector<QuestionRecord> train_probe) {
    const long batches = static_cast<long>((set_size + static_cast<std::size_t>(hp.batch_size) - 1) /
                                           static_cast<std::size_t>(hp.batch_size));
    long total = static_cast<long>(hp.epochs) * batches;
    if (hp.max_steps > 0) {
        total = std::min(total, hp.max_steps);
    }
    struct Shared {
        std::vector<QuestionRecord> test, probe;
        long last = 0;
    };
    auto shared = std::make_shared<Shared>(Shared{std::move(test), std::move(train_probe), 0});
    const int max_new = config.eval.max_new_tokens;
    const long interval = config.eval.interval_steps;
    TrainOptions options;
    options.monitor = [shared, batches, total, max_new, interval](const TinyTransformer& model, EpochMetrics& m) {
        const long done = std::min(total, static_cast<long>(m.epoch) * batches);
        if (done < total && done - shared->last < interval) {
            return;
        }
        shared->last = done;
        if (!shared->test.empty()) {
            m.eval_acc = evaluate(model, shared->test, max_new).accuracy;
        }
        if (!shared->probe.empty()) {
            m.train_acc = evaluate(model, shared->probe, max_new).accuracy;
        }
    };
    return options;
}

double final_accuracy(const std::vector<EpochMetrics>& curve) { return curve.empty() ? kNaN : curve.back().eval_acc; }

double best_accuracy(const std::vector<EpochMetrics>& curve) {
    double best = kNaN;
    for (const auto& m : curve) {
        if (!std::isnan(m.eval_acc) && (std::isnan(best) || m.eval_acc > best)) {
            best = m.eval_acc;
        }
    }
    return best;
}

// ---------------- cells ----------------

namespace {
// Collapses specs that train identically: an effective weight of 0 is NoSLD, 1 is
// NoRD, and the mentor preset only matters when the mentor is used.
CellSpec canonical(CellSpec spec) {
    const double lam = effective_lambda(spec.ablation, spec.lambda);
    spec.ablation = lam == 0.0 ? Ablation::NoSLD : lam == 1.0 ? Ablation::NoRD : spec.ablation;
    spec.lambda = lam;
    if (spec.degree == 0 && spec.ablation == Ablation::NoSLD) {
        spec.mentor_preset.clear();
    }
    return spec;
}
}  // namespace

std::string CellSpec::key() const {
    const CellSpec c = canonical(*this);
    return "fraction=" + fmt(c.fraction) + ",degree=" + std::to_string(c.degree) + ",lambda=" + fmt(c.lambda) +
           ",ablation=" + to_string(c.ablation) + ",mentor=" + c.mentor_preset;
}

SweepContext::SweepContext(RunConfig config) : config_(std::move(config)) { config_.validate(); }

void SweepContext::note(const std::string& msg) {
    if (log) {
        std::lock_guard lock(mutex_);
        log(msg);
    }
}

template <class V>
const V& SweepContext::memo(std::map<std::string, std::shared_ptr<V>>& store, const std::string& key,
                            const std::function<V()>& make) {
    const std::string lock_key = std::to_string(reinterpret_cast<std::uintptr_t>(&store)) + "|" + key;
    std::shared_ptr<std::mutex> key_lock;
    {
        std::lock_guard lock(mutex_);
        if (auto it = store.find(key); it != store.end()) {
            return *it->second;
        }
        auto& slot = key_locks_[lock_key];
        if (!slot) {
            slot = std::make_shared<std::mutex>();
        }
        key_lock = slot;
    }
    // one producer per key; other workers wait here for its result
    std::lock_guard produce(*key_lock);
    {
        std::lock_guard lock(mutex_);
        if (auto it = store.find(key); it != store.end()) {
            return *it->second;
        }
    }
    auto value = std::make_shared<V>(make());
    std::lock_guard lock(mutex_);
    return *store.emplace(key, std::move(value)).first->second;
}

const DatasetSplits& SweepContext::splits(std::uint64_t seed) {
    return memo<DatasetSplits>(splits_, std::to_string(seed), [&] { return make_splits(config_, seed); });
}

const std::vector<CoTAnnotation>& SweepContext::teacher_annotations(std::uint64_t seed) {
    return memo<std::vector<CoTAnnotation>>(annotations_, std::to_string(seed), [&] {
        std::vector<RemoteFailure> failures;
        auto anns = annotate_teacher(config_, splits(seed).train, seed, &failures);
        if (!failures.empty()) {
            note("seed " + std::to_string(seed) + ": " + std::to_string(failures.size()) + " remote teacher failures");
        }
        return anns;
    });
}

const std::vector<QuestionRecord>& SweepContext::pool(std::uint64_t seed, double fraction) {
    return memo<std::vector<QuestionRecord>>(pools_, fraction_key(seed, fraction), [&] {
        const auto records = records_of(splits(seed).train);
        return select_fraction(records, fraction, seed);
    });
}

const DistillationSet& SweepContext::teacher_set(std::uint64_t seed, double fraction) {
    return memo<DistillationSet>(teacher_sets_, fraction_key(seed, fraction), [&] {
        return build_teacher_set(config_, teacher_annotations(seed), pool(seed, fraction));
    });
}

const TinyTransformer& SweepContext::mentor(std::uint64_t seed, double fraction, const std::string& preset) {
    const std::string key = fraction_key(seed, fraction) + ",preset=" + preset;
    return memo<TinyTransformer>(mentors_, key, [&] {
        const auto& tset = teacher_set(seed, fraction);
        auto model = make_model(preset, config_.data.task, ModelRole::Mentor, stage_seeds(seed).mentor_init);
        note("training mentor " + key + " on " + std::to_string(tset.size()) + " examples");
        train_mentor(model, tset, mentor_schedule(config_, seed));
        const double acc = evaluate(model, records_of(splits(seed).test), config_.eval.max_new_tokens).accuracy;
        note("mentor " + key + " held-out accuracy " + fmt(acc));
        std::lock_guard lock(mutex_);
        mentor_accuracy_[key] = acc;
        return model;
    });
}

const DistillationSet& SweepContext::mentor_set(std::uint64_t seed, double fraction, const std::string& preset,
                                                int degree) {
    const std::string key = fraction_key(seed, fraction) + ",preset=" + preset + ",degree=" + std::to_string(degree);
    return memo<DistillationSet>(mentor_sets_, key, [&] {
        const auto& m = mentor(seed, fraction, preset);
        auto set = augment_with_mentor(m, pool(seed, fraction), degree, stage_seeds(seed).augment, config_.augment);
        note("augmented " + key + ": " + std::to_string(set.size()) + " mentor examples");
        return set;
    });
}

const CellOutcome& SweepContext::cell(const CellSpec& spec, std::uint64_t seed) {
    return memo<CellOutcome>(cells_, spec.key() + ",seed=" + std::to_string(seed),
                             [&] { return run_cell(*this, spec, seed); });
}

std::map<std::string, double> SweepContext::mentor_accuracies() const {
    std::lock_guard lock(mutex_);
    return mentor_accuracy_;
}

CellOutcome run_cell(SweepContext& context, const CellSpec& requested, std::uint64_t seed) {
    const RunConfig& config = context.config();
    const CellSpec spec = canonical(requested);
    const bool needs_mentor = spec.degree > 0 || spec.ablation != Ablation::NoSLD;
    const TinyTransformer* mentor = needs_mentor ? &context.mentor(seed, spec.fraction, spec.mentor_preset) : nullptr;

    DistillationSet train_set = context.teacher_set(seed, spec.fraction);
    if (spec.degree > 0) {
        train_set = union_sets(train_set, context.mentor_set(seed, spec.fraction, spec.mentor_preset, spec.degree));
    }

    DistillHyperparameters dh = config.student;
    dh.lambda = spec.lambda;
    dh.ablation = spec.ablation;
    dh.augmentation_degree = spec.degree;
    dh.train = student_schedule(config, train_set.size(), seed);

    const auto& splits = context.splits(seed);
    auto test = records_of(splits.test);
    auto probe = records_of(splits.train);
    probe.resize(std::min(probe.size(), static_cast<std::size_t>(config.eval.train_probe)));
    check_disjoint(records_of(splits.train), test);

    auto student = make_model(config.student_preset, config.data.task, ModelRole::Student,
                              stage_seeds(seed).student_init);
    const auto options = accuracy_monitor(config, dh.train, train_set.size(), std::move(test), std::move(probe));
    const auto result = train_student(student, mentor, train_set, dh, options);

    CellOutcome out;
    out.curve = result.curve;
    out.train_size = train_set.size();
    out.final_accuracy = final_accuracy(out.curve);
    out.best_accuracy = best_accuracy(out.curve);
    return out;
}

// ---------------- sweeps ----------------

std::pair<double, double> mean_and_stddev(const std::vector<double>& values) {
    if (values.empty()) {
        return {kNaN, kNaN};
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() == 1) {
        return {mean, 0.0};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

const SweepCell& SweepResult::cell(std::string_view label) const {
    for (const auto& c : cells) {
        if (c.label == label) {
            return c;
        }
    }
    throw DataError("sweep " + experiment + " has no cell '" + std::string(label) + "'");
}

std::vector<std::string> experiment_names() { return {"ablation", "degree", "lowresource", "mentorsize", "lambda"}; }

namespace {

CellSpec mentor_kd_cell(const RunConfig& config) {
    CellSpec c;
    c.arm = "mentor-kd";
    c.degree = config.student.augmentation_degree;
    c.lambda = config.student.lambda;
    c.ablation = Ablation::Full;
    c.mentor_preset = config.mentor_preset;
    c.fraction = config.data.fraction;
    return c;
}

CellSpec vanilla_cell(const RunConfig& config) {
    CellSpec c = mentor_kd_cell(config);
    c.arm = "vanilla-kd";
    c.degree = 0;
    c.lambda = 0.0;
    c.ablation = Ablation::NoSLD;
    return c;
}

}  // namespace

std::vector<CellSpec> ablation_cells(const RunConfig& config) {
    std::vector<CellSpec> cells;
    for (const auto ablation : {Ablation::Full, Ablation::NoRD, Ablation::NoSLD}) {
        CellSpec c = mentor_kd_cell(config);
        c.ablation = ablation;
        c.arm = c.label = to_string(ablation);
        // the ablated term's weight is fixed by the ablation itself
        c.lambda = effective_lambda(ablation, config.student.lambda);
        c.x = static_cast<double>(cells.size());
        cells.push_back(c);
    }
    CellSpec v = vanilla_cell(config);
    v.label = "vanilla-kd";
    v.x = static_cast<double>(cells.size());
    cells.push_back(v);
    return cells;
}

std::vector<CellSpec> degree_cells(const RunConfig& config) {
    std::vector<CellSpec> cells;
    for (int d : config.sweep.degrees) {
        CellSpec c = mentor_kd_cell(config);
        c.degree = d;
        c.x = d;
        c.label = "degree=" + std::to_string(d);
        cells.push_back(c);
    }
    return cells;
}

std::vector<CellSpec> lowresource_cells(const RunConfig& config) {
    std::vector<CellSpec> cells;
    for (double f : config.sweep.fractions) {
        for (CellSpec c : {vanilla_cell(config), mentor_kd_cell(config)}) {
            c.fraction = f;
            c.x = f;
            c.label = c.arm + "@" + fmt(f);
            cells.push_back(c);
        }
    }
    return cells;
}

std::vector<CellSpec> mentorsize_cells(const RunConfig& config) {
    std::vector<CellSpec> cells;
    for (const auto& p : config.sweep.mentor_presets) {
        CellSpec c = mentor_kd_cell(config);
        c.mentor_preset = p;
        c.x = static_cast<double>(cells.size());
        c.label = "mentor=" + p;
        cells.push_back(c);
    }
    return cells;
}

std::vector<CellSpec> lambda_cells(const RunConfig& config) {
    std::vector<CellSpec> cells;
    for (double l : config.sweep.lambdas) {
        CellSpec c = mentor_kd_cell(config);
        c.lambda = l;
        c.x = l;
        c.label = "lambda=" + fmt(l);
        cells.push_back(c);
    }
    return cells;
}

SweepResult run_cells(SweepContext& context, const std::string& experiment, const std::string& axis,
                      const std::vector<CellSpec>& cells) {
    const auto& seeds = context.config().sweep.seeds;
    const std::size_t jobs = cells.size() * seeds.size();
    const int workers = std::max(1, std::min<int>(context.config().sweep.workers, static_cast<int>(jobs)));

    // seed-major order: a seed's shared artifacts are built once and reused by its cells
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&](bool own_threads) {
        if (own_threads) {
            omp_set_num_threads(1);
        }
        for (std::size_t j = next++; j < jobs; j = next++) {
            const auto& spec = cells[j % cells.size()];
            const auto seed = seeds[j / cells.size()];
            try {
                const auto& out = context.cell(spec, seed);
                if (context.log) {
                    context.log(experiment + " " + spec.label + " seed " + std::to_string(seed) + ": final " +
                                fmt(out.final_accuracy) + " best " + fmt(out.best_accuracy) + " (n=" +
                                std::to_string(out.train_size) + ")");
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = jobs;
            }
        }
    };
    if (workers == 1) {
        worker(false);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker, true);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    SweepResult result;
    result.experiment = experiment;
    result.axis = axis;
    result.seeds = seeds;
    for (const auto& spec : cells) {
        SweepCell cell;
        cell.label = spec.label;
        cell.arm = spec.arm;
        cell.x = spec.x;
        for (const auto seed : seeds) {
            const auto& out = context.cell(spec, seed);
            cell.final_accuracy.push_back(out.final_accuracy);
            cell.best_accuracy.push_back(out.best_accuracy);
        }
        std::tie(cell.mean, cell.stddev) = mean_and_stddev(cell.final_accuracy);
        std::tie(cell.best_mean, cell.best_stddev) = mean_and_stddev(cell.best_accuracy);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

SweepResult run_ablation(SweepContext& context) {
    return run_cells(context, "ablation", "variant", ablation_cells(context.config()));
}
SweepResult run_degree_sweep(SweepContext& context) {
    return run_cells(context, "degree", "augmentation_degree", degree_cells(context.config()));
}
SweepResult run_lowresource_sweep(SweepContext& context) {
    return run_cells(context, "lowresource", "fraction", lowresource_cells(context.config()));
}
SweepResult run_mentorsize_sweep(SweepContext& context) {
    return run_cells(context, "mentorsize", "mentor_preset", mentorsize_cells(context.config()));
}
SweepResult run_lambda_sweep(SweepContext& context) {
    return run_cells(context, "lambda", "lambda", lambda_cells(context.config()));
}

SweepResult run_experiment(SweepContext& context, const std::string& name) {
    if (name == "ablation") return run_ablation(context);
    if (name == "degree") return run_degree_sweep(context);
    if (name == "lowresource") return run_lowresource_sweep(context);
    if (name == "mentorsize") return run_mentorsize_sweep(context);
    if (name == "lambda") return run_lambda_sweep(context);
    throw ConfigError("unknown experiment '" + name + "' (expected ablation, degree, lowresource, mentorsize, lambda)");
}

// ---------------- CSV ----------------

namespace {

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? ";" : "") + fmt(values[i]);
    }
    return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s) {
    if (s == "nan" || s == "-nan") {
        return kNaN;
    }
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("not a number: '" + s + "'");
    }
    return v;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= 1e-12; }

}  // namespace

void save_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    std::string seeds;
    for (std::size_t i = 0; i < result.seeds.size(); ++i) {
        seeds += (i ? ";" : "") + std::to_string(result.seeds[i]);
    }
    out << kSweepCsvHeader << '\n';
    for (const auto& c : result.cells) {
        out << result.experiment << ',' << result.axis << ',' << c.label << ',' << c.arm << ',' << fmt(c.x) << ','
            << seeds << ',' << join(c.final_accuracy) << ',' << join(c.best_accuracy) << ',' << fmt(c.mean) << ','
            << fmt(c.stddev) << ',' << fmt(c.best_mean) << ',' << fmt(c.best_stddev) << '\n';
    }
}

SweepResult load_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != kSweepCsvHeader) {
        throw DataError(path.string() + ": unexpected header");
    }
    SweepResult result;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto where = path.string() + ": line " + std::to_string(lineno) + ": ";
        try {
            const auto f = split(line, ',');
            if (f.size() != 12) {
                throw DataError("expected 12 fields, got " + std::to_string(f.size()));
            }
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split(f[5], ';')) {
                seeds.push_back(std::stoull(s));
            }
            if (result.cells.empty()) {
                result.experiment = f[0];
                result.axis = f[1];
                result.seeds = seeds;
            } else if (f[0] != result.experiment || f[1] != result.axis || seeds != result.seeds) {
                throw DataError("rows disagree on experiment, axis or seeds");
            }
            SweepCell c;
            c.label = f[2];
            c.arm = f[3];
            c.x = parse_double(f[4]);
            for (const auto& s : split(f[6], ';')) {
                c.final_accuracy.push_back(parse_double(s));
            }
            for (const auto& s : split(f[7], ';')) {
                c.best_accuracy.push_back(parse_double(s));
            }
            if (c.final_accuracy.size() != seeds.size() || c.best_accuracy.size() != seeds.size()) {
                throw DataError("per-seed value count does not match the seed list");
            }
            c.mean = parse_double(f[8]);
            c.stddev = parse_double(f[9]);
            c.best_mean = parse_double(f[10]);
            c.best_stddev = parse_double(f[11]);
            const auto [m, s] = mean_and_stddev(c.final_accuracy);
            const auto [bm, bs] = mean_and_stddev(c.best_accuracy);
            if (!same(m, c.mean) || !same(s, c.stddev) || !same(bm, c.best_mean) || !same(bs, c.best_stddev)) {
                throw DataError("stored mean/stddev do not match the per-seed values of cell '" + c.label + "'");
            }
            result.cells.push_back(std::move(c));
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        } catch (const std::logic_error& e) {
            throw DataError(where + "malformed field (" + e.what() + ")");
        }
    }
    return result;
}

std::string plot_data(const SweepResult& result) {
    std::ostringstream out;
    out << "arm,label,x,y,sigma\n";
    for (const auto& c : result.cells) {
        out << c.arm << ',' << c.label << ',' << fmt(c.x) << ',' << fmt(c.mean) << ',' << fmt(c.stddev) << '\n';
    }
    return out.str();
}

}  // namespace mentorkd
