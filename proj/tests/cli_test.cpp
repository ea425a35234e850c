#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "mentorkd/cli.hpp"
#include "mentorkd/config.hpp"
#include "mentorkd/sweep.hpp"
#include "run_dir_check.hpp"

using namespace mentorkd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status;
    std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int status = cli_dispatch(args, out, err);
    return {status, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mentorkd_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig resolved(const fs::path& dir) { return load_run_config(dir / files::kResolvedConfig); }

}  // namespace

TEST_CASE("help lists every subcommand") {
    const auto r = run({"--help"});
    CHECK(r.status == 0);
    for (const char* sub : {"gen-data", "annotate", "filter", "train-mentor", "augment", "train-student", "evaluate",
                            "sweep", "plot-data", "pipeline"}) {
        CHECK(r.out.find(sub) != std::string::npos);
    }
    CHECK(run({"pipeline", "--help"}).status == 0);
}

TEST_CASE("usage errors exit 1") {
    CHECK(run({"gen-data", "--no-such-flag"}).status == 1);
    CHECK(run({"frobnicate"}).status == 1);
    CHECK(run({}).status == 1);
    CHECK(run({"train-student", "--ablation", "half"}).status == 1);
}

TEST_CASE("runtime errors exit 2 with the cause") {
    const auto dir = scratch("missing");
    const auto r = run({"gen-data", "--config", "/no/such/config.toml", "--out", dir.string()});
    CHECK(r.status == 2);
    CHECK(r.err.find("/no/such/config.toml") != std::string::npos);
    const auto bad = scratch("bad") / "bad.toml";
    std::ofstream(bad) << "[student]\nlamda = 0.1\n";
    const auto r2 = run({"gen-data", "--config", bad.string(), "--out", dir.string()});
    CHECK(r2.status == 2);
    CHECK(r2.err.find("student.lamda") != std::string::npos);
}

TEST_CASE("command line beats config file beats defaults, per key") {
    struct Case {
        std::string flag, value, section_key, file_value;
        std::function<std::string(const RunConfig&)> get;
        std::string default_value;
    };
    auto num = [](double v) {
        std::ostringstream s;
        s << v;
        return s.str();
    };
    const std::vector<Case> cases = {
        {"--seed", "9", "seed", "4", [&](const RunConfig& c) { return std::to_string(c.seed); }, "0"},
        {"--lambda", "0.7", "student.lambda", "0.5", [&](const RunConfig& c) { return num(c.student.lambda); }, "0.3"},
        {"--tau", "1.5", "student.temperature", "1", [&](const RunConfig& c) { return num(c.student.temperature); },
         "2"},
        {"--degree", "6", "augment.degree", "1",
         [&](const RunConfig& c) { return std::to_string(c.student.augmentation_degree); }, "3"},
        {"--fraction", "0.4", "data.fraction", "0.6", [&](const RunConfig& c) { return num(c.data.fraction); }, "1"},
        {"--ablation", "no-rd", "student.ablation", "\"no-sld\"",
         [&](const RunConfig& c) { return to_string(c.student.ablation); }, "full"},
        {"--teacher", "remote", "teacher.kind", "\"oracle\"", [&](const RunConfig& c) { return c.teacher_kind; },
         "oracle"},
    };
    const auto cfg_dir = scratch("precedence");
    for (const auto& c : cases) {
        CAPTURE(c.flag);
        const auto dot = c.section_key.find('.');
        const auto cfg = cfg_dir / "cfg.toml";
        {
            std::ofstream f(cfg);
            if (dot == std::string::npos) f << c.section_key << " = " << c.file_value << "\n";
            f << "[data]\ntrain_size = 10\ntest_size = 5\ndifficulty = 2\n";
            if (dot == std::string::npos) {
            } else if (c.section_key.substr(0, dot) == "data") {
                f << c.section_key.substr(dot + 1) << " = " << c.file_value << "\n";
            } else {
                f << "[" << c.section_key.substr(0, dot) << "]\n" << c.section_key.substr(dot + 1) << " = "
                  << c.file_value << "\n";
            }
        }
        std::string file_value = c.file_value;
        if (file_value.front() == '"') file_value = file_value.substr(1, file_value.size() - 2);

        const auto d1 = cfg_dir / "flag";
        REQUIRE(run({"gen-data", "--config", cfg.string(), "--out", d1.string(), c.flag, c.value}).status == 0);
        CHECK(c.get(resolved(d1)) == c.value);

        const auto d2 = cfg_dir / "file";
        REQUIRE(run({"gen-data", "--config", cfg.string(), "--out", d2.string()}).status == 0);
        CHECK(c.get(resolved(d2)) == file_value);

        const auto small = cfg_dir / "small.toml";
        std::ofstream(small) << "[data]\ntrain_size = 10\ntest_size = 5\ndifficulty = 2\n";
        const auto d3 = cfg_dir / "default";
        REQUIRE(run({"gen-data", "--config", small.string(), "--out", d3.string()}).status == 0);
        CHECK(c.get(resolved(d3)) == c.default_value);
    }
}

TEST_CASE("pipeline smoke run on 50 questions") {
    const auto dir = scratch("smoke");
    const auto start = std::chrono::steady_clock::now();
    const auto r = run({"pipeline", "--config", std::string(MENTORKD_SOURCE_DIR) + "/configs/smoke.toml", "--out",
                        dir.string()});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    INFO(r.err);
    CHECK(r.status == 0);
    CHECK(seconds < 120.0);
    CHECK(testing::validate_run_dir(dir).empty());
    const auto report = load_eval_report(dir / files::kEvalReport);
    CHECK(report.split_size == 20);

    // stage-by-stage replay of the manifest reproduces the report
    const auto again = scratch("smoke_stages");
    const std::string cfg = std::string(MENTORKD_SOURCE_DIR) + "/configs/smoke.toml";
    for (const char* stage : {"gen-data", "annotate", "filter", "train-mentor", "augment", "train-student",
                              "evaluate"}) {
        REQUIRE(run({stage, "--config", cfg, "--out", again.string()}).status == 0);
    }
    CHECK(load_eval_report(again / files::kEvalReport) == report);
}

TEST_CASE("plot-data re-emits a sweep csv") {
    const auto dir = scratch("plot");
    SweepResult r;
    r.experiment = "lambda";
    r.axis = "lambda";
    r.seeds = {0, 1};
    SweepCell c;
    c.label = "lambda=0.5";
    c.arm = "mentor-kd";
    c.x = 0.5;
    c.final_accuracy = {0.5, 0.5};
    c.best_accuracy = {0.5, 0.75};
    c.mean = 0.5;
    c.best_mean = 0.625;
    c.best_stddev = mean_and_stddev(c.best_accuracy).second;
    r.cells.push_back(c);
    save_sweep_csv(r, dir / "s.csv");
    const auto out = run({"plot-data", "--input", (dir / "s.csv").string()});
    CHECK(out.status == 0);
    CHECK(out.out == "arm,label,x,y,sigma\nmentor-kd,lambda=0.5,0.5,0.5,0\n");
}
