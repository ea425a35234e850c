#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mentorkd/config.hpp"
#include "mentorkd/error.hpp"

using namespace mentorkd;

TEST_CASE("parser handles the supported value types") {
    const auto t = parse_config_text(R"(
seed = 7   # trailing comment
[data]
task = "chain_arithmetic"
fraction = 0.25
train_size = 1_000
[teacher]
corruption_modes = [
  "wrong_final_answer",  # one per line
  "truncated_rationale",
]
[x]
flag = true
neg = -3
sci = 2e-3
esc = "a\"b\\c"
)");
    CHECK(std::get<std::int64_t>(t.at("seed").data) == 7);
    CHECK(std::get<std::string>(t.at("data.task").data) == "chain_arithmetic");
    CHECK(std::get<double>(t.at("data.fraction").data) == 0.25);
    CHECK(std::get<std::int64_t>(t.at("data.train_size").data) == 1000);
    CHECK(std::get<ConfigValue::Array>(t.at("teacher.corruption_modes").data).size() == 2);
    CHECK(std::get<bool>(t.at("x.flag").data));
    CHECK(std::get<std::int64_t>(t.at("x.neg").data) == -3);
    CHECK(std::get<double>(t.at("x.sci").data) == 2e-3);
    CHECK(std::get<std::string>(t.at("x.esc").data) == "a\"b\\c");
}

TEST_CASE("parse errors carry the line number") {
    auto message = [](const std::string& text) {
        try {
            parse_config_text(text, "cfg.toml");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("a = 1\nb = \n").find("cfg.toml: line 2") != std::string::npos);
    CHECK(message("[data\n").find("line 1") != std::string::npos);
    CHECK(message("a = 1\na = 2\n").find("line 2") != std::string::npos);
    CHECK(message("a = \"open\n").find("line 1") != std::string::npos);
}

TEST_CASE("unknown keys and ill-typed values are hard errors") {
    RunConfig c;
    try {
        apply_config(c, parse_config_text("[student]\nlamda = 0.3\n"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("student.lamda") != std::string::npos);
    }
    CHECK_THROWS_AS(apply_config(c, parse_config_text("[student]\nlambda = \"high\"\n")), ConfigError);
    CHECK_THROWS_AS(apply_config(c, parse_config_text("[data]\ntask = \"sorting\"\n")), ConfigError);
    RunConfig bad;
    bad.student.lambda = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("defaults") {
    const RunConfig c;
    CHECK(c.student.lambda == 0.3);
    CHECK(c.student.temperature == 2.0);
    CHECK(c.student.ablation == Ablation::Full);
    CHECK(c.teacher.corruption_rate == 0.4);
    CHECK(c.data.task == TaskKind::LastLetter);
    CHECK(c.label_template == LabelTemplate::Compact);
    CHECK(c.sweep.seeds.size() == 4);
    CHECK(c.sweep.degrees == std::vector<int>{0, 1, 3, 6, 9});
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("to_toml round trips every key") {
    RunConfig c;
    c.seed = 11;
    c.data.task = TaskKind::ShuffledObjects;
    c.data.fraction = 0.4;
    c.student.lambda = 0.5;
    c.student.ablation = Ablation::NoRD;
    c.teacher.corruption_modes = {CorruptionMode::TruncatedRationale};
    c.sweep.lambdas = {0.0, 1.0};
    c.sweep.mentor_presets = {"micro"};
    c.remote.url = "http://localhost:9/x";
    const auto text = to_toml(c);
    RunConfig back;
    apply_config(back, parse_config_text(text));
    CHECK(to_toml(back) == text);
    CHECK(config_entries(back) == config_entries(c));
}

TEST_CASE("config file loading") {
    const auto p = std::filesystem::temp_directory_path() / "mentorkd_config_test.toml";
    std::ofstream(p) << "[student]\nlambda = 0.7\n";
    CHECK(load_run_config(p).student.lambda == 0.7);
    try {
        load_run_config("/nonexistent/dir/cfg.toml");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/cfg.toml") != std::string::npos);
    }
}
