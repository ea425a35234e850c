#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mentorkd/error.hpp"
#include "mentorkd/eval.hpp"
#include "mentorkd/sweep.hpp"

using namespace mentorkd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mentorkd_eval_test";
    fs::create_directories(dir);
    return dir / name;
}

// A tiny but complete configuration: 40 training and 20 test questions, micro models.
RunConfig tiny_config() {
    RunConfig c;
    c.data.train_size = 40;
    c.data.test_size = 20;
    c.data.difficulty = 2;
    c.mentor_preset = "micro";
    c.mentor_train.epochs = 2;
    c.mentor_train.batch_size = 16;
    c.student_steps = 12;
    c.student.train.batch_size = 16;
    c.augment.max_new_tokens = 40;
    c.eval.max_new_tokens = 40;
    c.eval.train_probe = 5;
    c.sweep.seeds = {0};
    return c;
}

SweepResult fake_result() {
    SweepResult r;
    r.experiment = "ablation";
    r.axis = "variant";
    r.seeds = {0, 1, 2};
    for (const auto& [label, vals] : std::vector<std::pair<std::string, std::vector<double>>>{
             {"full", {0.5, 0.6, 0.7}}, {"no-sld", {0.25, 0.5, 0.75}}}) {
        SweepCell c;
        c.label = label;
        c.arm = "mentor-kd";
        c.x = 0;
        c.final_accuracy = vals;
        c.best_accuracy = vals;
        std::tie(c.mean, c.stddev) = mean_and_stddev(vals);
        std::tie(c.best_mean, c.best_stddev) = mean_and_stddev(vals);
        r.cells.push_back(c);
    }
    return r;
}

}  // namespace

TEST_CASE("overlapping splits are rejected with the offending ids") {
    const auto a = records_of(generate_dataset(TaskKind::LastLetter, 5, 1, 2));
    auto b = records_of(generate_dataset(TaskKind::LastLetter, 3, 2, 2, 100));
    CHECK_NOTHROW(check_disjoint(a, b));
    b[1].question = a[3].question;
    try {
        check_disjoint(a, b);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("101") != std::string::npos);
    }
    const TinyTransformer m(ModelConfig::preset("micro"), Tokenizer::for_task(TaskKind::LastLetter),
                            ModelRole::Student, 1);
    CHECK_THROWS_AS(evaluate(m, b, a, 8), DataError);
}

TEST_CASE("untrained model scores near chance and the report recounts") {
    const auto test = records_of(generate_dataset(TaskKind::LastLetter, 60, 3, 3));
    const TinyTransformer m(ModelConfig::preset("micro"), Tokenizer::for_task(TaskKind::LastLetter),
                            ModelRole::Student, 2);
    const auto report = evaluate(m, test, 40);
    CHECK(report.split_size == 60);
    CHECK(report.accuracy < 0.05);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        CHECK(report.records[i].question_id == test[i].id);
        CHECK(report.records[i].gold == test[i].gold_answer);
        CHECK(report.records[i].correct == (report.records[i].prediction == test[i].gold_answer));
        correct += report.records[i].correct ? 1 : 0;
    }
    CHECK(report.accuracy == static_cast<double>(correct) / 60.0);
}

TEST_CASE("memorized evaluation set scores 1.0") {
    const auto instances = generate_dataset(TaskKind::LastLetter, 3, 4, 2);
    const auto records = records_of(instances);
    TeacherConfig tc;
    tc.annotations_per_question = 1;
    const auto set = reformat(filter_annotations(annotate_oracle(instances, tc), records), records,
                              LabelTemplate::Compact);
    TinyTransformer m(ModelConfig::preset("micro"), Tokenizer::for_task(TaskKind::LastLetter), ModelRole::Student, 5);
    TrainHyperparameters hp;
    hp.epochs = 300;
    hp.batch_size = 3;
    hp.learning_rate = 3e-3;
    hp.weight_decay = 0.0;
    train_lm(m, set, hp);
    CHECK(evaluate(m, records, 64).accuracy == 1.0);
}

TEST_CASE("report persistence validates the accuracy") {
    EvalReport r;
    r.task = TaskKind::ChainArithmetic;
    r.split_size = 4;
    r.records = {{1, "3", "3", true}, {2, "4", "5", false}, {3, "", "1", false}, {4, "9", "9", true}};
    r.accuracy = 0.5;
    const auto p = scratch("report.json");
    save_eval_report(r, p);
    CHECK(load_eval_report(p) == r);

    auto j = nlohmann::json::parse(std::ifstream(p));
    j["accuracy"] = 0.75;
    std::ofstream(p) << j.dump();
    CHECK_THROWS_AS(load_eval_report(p), DataError);
}

TEST_CASE("sample mean and deviation") {
    const auto [m, s] = mean_and_stddev({0.25, 0.5, 0.75});
    CHECK(m == doctest::Approx(0.5));
    CHECK(s == doctest::Approx(0.25));  // sqrt((0.0625 * 2) / 2)
    CHECK(mean_and_stddev({0.4}).second == 0.0);
}

TEST_CASE("sweep csv round trip and recount") {
    const auto r = fake_result();
    const auto p = scratch("sweep.csv");
    save_sweep_csv(r, p);
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == kSweepCsvHeader);
    const auto back = load_sweep_csv(p);
    CHECK(back.experiment == r.experiment);
    CHECK(back.seeds == r.seeds);
    REQUIRE(back.cells.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.cells[i].final_accuracy == r.cells[i].final_accuracy);
        double sum = 0;
        for (double v : back.cells[i].final_accuracy) sum += v;
        CHECK(std::abs(back.cells[i].mean - sum / 3) < 1e-12);
    }

    // tamper with the stored mean of the first cell
    std::vector<std::string> lines;
    {
        std::ifstream f(p);
        for (std::string line; std::getline(f, line);) lines.push_back(line);
    }
    std::vector<std::string> fields;
    {
        std::stringstream row(lines[1]);
        for (std::string field; std::getline(row, field, ',');) fields.push_back(field);
    }
    REQUIRE(fields.size() == 12);
    fields[8] = "0.9";
    std::string joined;
    for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
    lines[1] = joined;
    {
        std::ofstream f(p);
        for (const auto& line : lines) f << line << "\n";
    }
    CHECK_THROWS_AS(load_sweep_csv(p), DataError);

    const auto plot = plot_data(r);
    CHECK(plot.rfind("arm,label,x,y,sigma\n", 0) == 0);
    CHECK(plot.find("mentor-kd,no-sld,0,0.5,0.25\n") != std::string::npos);
}

TEST_CASE("single-cell single-seed sweep equals a direct evaluation and replays") {
    const RunConfig config = tiny_config();
    CellSpec spec;
    spec.label = "vanilla-kd";
    spec.arm = "vanilla-kd";
    spec.degree = 0;
    spec.lambda = 0.0;
    spec.ablation = Ablation::NoSLD;

    SweepContext ctx(config);
    const auto result = run_cells(ctx, "ablation", "variant", {spec});
    REQUIRE(result.cells.size() == 1);
    REQUIRE(result.cells[0].final_accuracy.size() == 1);

    // the same computation written out stage by stage
    const auto splits = make_splits(config, 0);
    const auto anns = annotate_teacher(config, splits.train, 0);
    const auto pool = select_fraction(records_of(splits.train), 1.0, 0);
    const auto set = build_teacher_set(config, anns, pool);
    auto student = make_model(config.student_preset, config.data.task, ModelRole::Student, stage_seeds(0).student_init);
    DistillHyperparameters dh = config.student;
    dh.lambda = 0.0;
    dh.ablation = Ablation::NoSLD;
    dh.augmentation_degree = 0;
    dh.train = student_schedule(config, set.size(), 0);
    train_student(student, nullptr, set, dh);
    const auto direct = evaluate(student, records_of(splits.test), config.eval.max_new_tokens);
    CHECK(result.cells[0].final_accuracy[0] == direct.accuracy);

    SweepContext again(config);
    CHECK(run_cells(again, "ablation", "variant", {spec}) == result);
}

TEST_CASE("equivalent cells share one computation") {
    CellSpec a, b;
    a.ablation = Ablation::Full;
    a.lambda = 0.0;
    b.ablation = Ablation::NoSLD;
    b.lambda = 0.3;
    CHECK(a.key() == b.key());
    a.lambda = 1.0;
    b.ablation = Ablation::NoRD;
    CHECK(a.key() == b.key());
    a.lambda = 0.3;
    CHECK(a.key() != b.key());
}

TEST_CASE("every sweep is defined over its configured grid") {
    const RunConfig c;
    CHECK(ablation_cells(c).size() == 4);
    CHECK(degree_cells(c).size() == c.sweep.degrees.size());
    CHECK(lowresource_cells(c).size() == 2 * c.sweep.fractions.size());
    CHECK(mentorsize_cells(c).size() == c.sweep.mentor_presets.size());
    CHECK(lambda_cells(c).size() == c.sweep.lambdas.size());
    for (const auto& name : experiment_names()) CHECK(!name.empty());
}
