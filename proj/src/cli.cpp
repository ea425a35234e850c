#include "mentorkd/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mentorkd/checkpoint.hpp"
#include "mentorkd/config.hpp"
#include "mentorkd/error.hpp"
#include "mentorkd/eval.hpp"
#include "mentorkd/sweep.hpp"

namespace mentorkd {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Flags {
    std::string config_path;
    std::optional<std::int64_t> seed;
    std::string out;
    std::optional<double> lambda, tau, fraction;
    std::optional<std::int64_t> degree;
    std::string ablation, teacher;
    std::string experiment;
    std::string input;
};

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

Json to_json(const ConfigValue& v) {
    return std::visit(
        [](const auto& x) -> Json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ConfigValue::Array>) {
                Json a = Json::array();
                for (const auto& item : x) {
                    a.push_back(to_json(item));
                }
                return a;
            } else {
                return Json(x);
            }
        },
        v.data);
}

Json config_json(const RunConfig& config) {
    Json j = Json::object();
    for (const auto& [key, value] : config_entries(config)) {
        j[key] = to_json(value);
    }
    return j;
}

RunConfig resolve(const Flags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) {
        apply_config(config, parse_config_file(flags.config_path));
    }
    // command line beats the file, which beats the defaults
    if (flags.seed) set_config_key(config, "seed", {*flags.seed});
    if (flags.lambda) set_config_key(config, "student.lambda", {*flags.lambda});
    if (flags.tau) set_config_key(config, "student.temperature", {*flags.tau});
    if (flags.degree) set_config_key(config, "augment.degree", {*flags.degree});
    if (flags.fraction) set_config_key(config, "data.fraction", {*flags.fraction});
    if (!flags.ablation.empty()) set_config_key(config, "student.ablation", {flags.ablation});
    if (!flags.teacher.empty()) set_config_key(config, "teacher.kind", {flags.teacher});
    config.validate();
    return config;
}

class Run {
public:
    Run(RunConfig config, fs::path dir, std::vector<std::string> argv, std::ostream& log)
        : config_(std::move(config)), dir_(std::move(dir)), argv_(std::move(argv)), log_(log) {
        fs::create_directories(dir_);
    }

    void gen_data() {
        const auto splits = make_splits(config_, config_.seed);
        save_instances_jsonl(splits.train, path(files::kRecordsTrain));
        save_instances_jsonl(splits.test, path(files::kRecordsTest));
        record("gen-data", {}, {files::kRecordsTrain, files::kRecordsTest},
               {{"train_size", splits.train.size()}, {"test_size", splits.test.size()}});
    }

    void annotate() {
        const auto instances = load_instances_jsonl(path(files::kRecordsTrain));
        std::vector<RemoteFailure> failures;
        const auto anns = annotate_teacher(config_, instances, config_.seed, &failures);
        save_annotations_jsonl(anns, path(files::kTeacherAnnotations));
        Json fail = Json::array();
        for (const auto& f : failures) {
            fail.push_back({{"question_id", f.question_id}, {"reason", f.reason}});
        }
        std::size_t correct = 0;
        for (const auto& a : anns) {
            correct += a.correct ? 1 : 0;
        }
        record("annotate", {files::kRecordsTrain}, {files::kTeacherAnnotations},
               {{"teacher", config_.teacher_kind}, {"annotations", anns.size()}, {"correct", correct}, {"failures", fail}});
    }

    void filter() {
        const auto records = records_of(load_instances_jsonl(path(files::kRecordsTrain)));
        const auto anns = load_annotations_jsonl(path(files::kTeacherAnnotations));
        const auto pool = select_fraction(records, config_.data.fraction, config_.seed);
        const auto set = build_teacher_set(config_, anns, pool);
        save_jsonl(set, path(files::kTeacherSet));
        record("filter", {files::kRecordsTrain, files::kTeacherAnnotations}, {files::kTeacherSet},
               {{"questions", pool.size()}, {"examples", set.size()}});
    }

    void train_mentor_stage() {
        const auto set = load_jsonl(path(files::kTeacherSet));
        auto mentor = make_model(config_.mentor_preset, config_.data.task, ModelRole::Mentor,
                                 stage_seeds(config_.seed).mentor_init);
        const auto hp = mentor_schedule(config_, config_.seed);
        const auto options = accuracy_monitor(config_, hp, set.size(), test_records(), {});
        const auto result = train_mentor(mentor, set, hp, options);
        save_checkpoint(mentor, &result.state, path(files::kMentorCheckpoint));
        write_metrics_csv(result.curve, path(files::kMentorMetrics));
        record("train-mentor", {files::kTeacherSet}, {files::kMentorCheckpoint, files::kMentorMetrics},
               {{"final_eval_acc", final_accuracy(result.curve)}});
    }

    void augment() {
        const int degree = config_.student.augmentation_degree;
        const auto records = records_of(load_instances_jsonl(path(files::kRecordsTrain)));
        const auto pool = select_fraction(records, config_.data.fraction, config_.seed);
        DistillationSet set;
        set.provenance = Provenance::MentorOnly;
        std::vector<std::string> inputs = {files::kRecordsTrain};
        if (degree > 0) {
            const auto mentor = load_checkpoint(path(files::kMentorCheckpoint)).model;
            set = augment_with_mentor(mentor, pool, degree, stage_seeds(config_.seed).augment, config_.augment);
            inputs.push_back(files::kMentorCheckpoint);
        }
        save_jsonl(set, path(files::kMentorSet));
        record("augment", inputs, {files::kMentorSet}, {{"degree", degree}, {"examples", set.size()}});
    }

    void train_student_stage() {
        DistillationSet train_set = load_jsonl(path(files::kTeacherSet));
        std::vector<std::string> inputs = {files::kTeacherSet};
        if (config_.student.augmentation_degree > 0) {
            train_set = union_sets(train_set, load_jsonl(path(files::kMentorSet)));
            inputs.push_back(files::kMentorSet);
        }
        save_jsonl(train_set, path(files::kTrainSet));

        std::optional<TinyTransformer> mentor;
        if (config_.student.ablation != Ablation::NoSLD) {
            mentor = load_checkpoint(path(files::kMentorCheckpoint)).model;
            inputs.push_back(files::kMentorCheckpoint);
        }
        auto student = make_model(config_.student_preset, config_.data.task, ModelRole::Student,
                                  stage_seeds(config_.seed).student_init);
        DistillHyperparameters dh = config_.student;
        dh.train = student_schedule(config_, train_set.size(), config_.seed);
        auto probe = records_of(load_instances_jsonl(path(files::kRecordsTrain)));
        probe.resize(std::min(probe.size(), static_cast<std::size_t>(config_.eval.train_probe)));
        const auto options = accuracy_monitor(config_, dh.train, train_set.size(), test_records(), std::move(probe));
        const auto result = train_student(student, mentor ? &*mentor : nullptr, train_set, dh, options);
        save_checkpoint(student, &result.state, path(files::kStudentCheckpoint));
        write_metrics_csv(result.curve, path(files::kStudentMetrics));
        record("train-student", inputs, {files::kTrainSet, files::kStudentCheckpoint, files::kStudentMetrics},
               {{"examples", train_set.size()},
                {"steps", result.state.step},
                {"final_eval_acc", final_accuracy(result.curve)},
                {"best_eval_acc", best_accuracy(result.curve)}});
    }

    void evaluate_stage() {
        const auto student = load_checkpoint(path(files::kStudentCheckpoint)).model;
        const auto test = records_of(load_instances_jsonl(path(files::kRecordsTest)));
        const auto train = records_of(load_instances_jsonl(path(files::kRecordsTrain)));
        const auto report = evaluate(student, test, train, config_.eval.max_new_tokens);
        save_eval_report(report, path(files::kEvalReport));
        log_ << "accuracy " << report.accuracy << " (" << report.correct_count() << "/" << report.split_size << ")\n";
        record("evaluate", {files::kStudentCheckpoint, files::kRecordsTest, files::kRecordsTrain}, {files::kEvalReport},
               {{"accuracy", report.accuracy}});
    }

private:
    fs::path path(const char* name) const { return dir_ / name; }

    std::vector<QuestionRecord> test_records() const {
        const auto p = path(files::kRecordsTest);
        return fs::exists(p) ? records_of(load_instances_jsonl(p)) : std::vector<QuestionRecord>{};
    }

    // Adds this stage to the directory manifest together with the full resolved config.
    void record(const std::string& stage, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs, Json extra) {
        const auto manifest_path = path(files::kManifest);
        Json manifest = Json::object();
        if (fs::exists(manifest_path)) {
            std::ifstream in(manifest_path);
            manifest = Json::parse(in);
        }
        const std::string toml = to_toml(config_);
        std::ofstream(path(files::kResolvedConfig), std::ios::trunc) << toml;
        manifest["tool"] = "mentorkd";
        manifest["format_version"] = 1;
        manifest["config_file"] = files::kResolvedConfig;
        manifest["config"] = config_json(config_);
        Json entry = Json::object();
        entry["command"] = argv_;
        entry["seed"] = config_.seed;
        entry["finished_at"] = utc_timestamp();
        entry["inputs"] = inputs;
        entry["outputs"] = outputs;
        entry["config_toml"] = toml;
        for (auto& [k, v] : extra.items()) {
            entry[k] = v;
        }
        manifest["stages"][stage] = entry;
        std::ofstream out(manifest_path, std::ios::trunc);
        out << manifest.dump(2) << '\n';
        log_ << stage << ": wrote";
        for (const auto& o : outputs) {
            log_ << ' ' << o;
        }
        log_ << '\n';
    }

    RunConfig config_;
    fs::path dir_;
    std::vector<std::string> argv_;
    std::ostream& log_;
};

void run_sweep(const RunConfig& config, const Flags& flags, const std::vector<std::string>& argv, std::ostream& out,
               std::ostream& err) {
    if (flags.experiment.empty()) {
        throw ConfigError("sweep needs --experiment {ablation,degree,lowresource,mentorsize,lambda}");
    }
    SweepContext context(config);
    context.log = [&err](const std::string& msg) { err << msg << std::endl; };
    const auto result = run_experiment(context, flags.experiment);
    const fs::path base = flags.out.empty() ? fs::path(config.sweep.results_dir) : fs::path(flags.out);
    const std::string stamp = utc_timestamp();
    const fs::path csv = base / flags.experiment / (stamp + ".csv");
    save_sweep_csv(result, csv);
    Json manifest;
    manifest["tool"] = "mentorkd";
    manifest["format_version"] = 1;
    manifest["experiment"] = flags.experiment;
    manifest["command"] = argv;
    manifest["timestamp"] = stamp;
    manifest["csv"] = csv.filename().string();
    manifest["seeds"] = config.sweep.seeds;
    manifest["config"] = config_json(config);
    manifest["config_toml"] = to_toml(config);
    Json mentors = Json::object();
    for (const auto& [k, v] : context.mentor_accuracies()) {
        mentors[k] = v;
    }
    manifest["mentor_accuracy"] = mentors;
    std::ofstream(base / flags.experiment / (stamp + ".manifest.json"), std::ios::trunc) << manifest.dump(2) << '\n';
    out << csv.string() << '\n';
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mentor-guided reasoning distillation lab"};
    app.name("mentorkd");
    app.require_subcommand(1);
    Flags flags;

    const std::vector<std::pair<std::string, std::string>> descriptions = {
        {"gen-data", "generate train/test question splits"},
        {"annotate", "annotate training questions with the teacher"},
        {"filter", "filter teacher annotations into the teacher set"},
        {"train-mentor", "fine-tune the mentor on the teacher set"},
        {"augment", "generate mentor rationales for the training questions"},
        {"train-student", "train the student on the union set"},
        {"evaluate", "score the student on the test split"},
        {"sweep", "run an experiment grid over seeds"},
        {"plot-data", "re-emit a sweep CSV as x/y/sigma columns"},
        {"pipeline", "run every stage end to end"},
    };
    for (const auto& [name, description] : descriptions) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", flags.config_path, "TOML config file");
        sub->add_option("--out", flags.out, "output directory");
        if (name == "plot-data") {
            sub->add_option("--input", flags.input, "sweep CSV")->required();
            continue;
        }
        sub->add_option("--seed", flags.seed, "run seed");
        sub->add_option("--lambda", flags.lambda, "loss interpolation weight");
        sub->add_option("--tau", flags.tau, "distillation temperature");
        sub->add_option("--degree", flags.degree, "mentor rationales per question");
        sub->add_option("--fraction", flags.fraction, "share of training questions kept");
        sub->add_option("--ablation", flags.ablation, "full, no-rd or no-sld")
            ->check(CLI::IsMember({"full", "no-rd", "no-sld"}));
        sub->add_option("--teacher", flags.teacher, "oracle or remote")->check(CLI::IsMember({"oracle", "remote"}));
        if (name == "sweep") {
            sub->add_option("--experiment", flags.experiment, "ablation, degree, lowresource, mentorsize or lambda");
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    std::vector<std::string> argv = {"mentorkd"};
    argv.insert(argv.end(), args.begin(), args.end());

    try {
        if (command == "plot-data") {
            out << plot_data(load_sweep_csv(flags.input));
            return 0;
        }
        const RunConfig config = resolve(flags);
        if (command == "sweep") {
            run_sweep(config, flags, argv, out, err);
            return 0;
        }
        Run run(config, flags.out.empty() ? fs::path("run") : fs::path(flags.out), argv, err);
        if (command == "gen-data") run.gen_data();
        else if (command == "annotate") run.annotate();
        else if (command == "filter") run.filter();
        else if (command == "train-mentor") run.train_mentor_stage();
        else if (command == "augment") run.augment();
        else if (command == "train-student") run.train_student_stage();
        else if (command == "evaluate") run.evaluate_stage();
        else if (command == "pipeline") {
            run.gen_data();
            run.annotate();
            run.filter();
            run.train_mentor_stage();
            run.augment();
            run.train_student_stage();
            run.evaluate_stage();
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace mentorkd
