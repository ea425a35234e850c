#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mentorkd/dataset.hpp"
#include "mentorkd/distill.hpp"
#include "mentorkd/tasks.hpp"
#include "mentorkd/teacher.hpp"

namespace mentorkd {

// ---- a small TOML subset: [section] headers, key = value, strings, integers,
// floats, booleans and (possibly multi-line) arrays of those. ----

struct ConfigValue {
    using Array = std::vector<ConfigValue>;
    std::variant<bool, std::int64_t, double, std::string, Array> data;

    bool operator==(const ConfigValue&) const = default;
};

// "section.key" -> value; top-level keys have no dot.
using ConfigTable = std::map<std::string, ConfigValue>;

ConfigTable parse_config_text(const std::string& text, const std::string& origin = "<config>");
ConfigTable parse_config_file(const std::filesystem::path& path);

std::string render_config_value(const ConfigValue& value);

struct DataSettings {
    TaskKind task = TaskKind::LastLetter;
    int train_size = 2000;
    int test_size = 300;
    int difficulty = 3;
    std::uint64_t seed = 100;
    double fraction = 1.0;  // low-resource: share of teacher questions kept
};

struct EvalSettings {
    int max_new_tokens = 96;
    int train_probe = 100;          // training questions scored for train_acc
    int interval_steps = 300;       // evaluate after the first epoch ending this many steps past the last one
};

struct SweepSettings {
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
    std::vector<int> degrees = {0, 1, 3, 6, 9};
    std::vector<double> fractions = {0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> lambdas = {0.0, 0.1, 0.3, 0.5, 0.7, 1.0};
    std::vector<std::string> mentor_presets = {"micro", "student", "mentor", "large-mentor"};
    int workers = 1;
    std::string results_dir = "results";
};

struct RunConfig {
    std::uint64_t seed = 0;
    DataSettings data;
    std::string teacher_kind = "oracle";  // oracle | remote
    TeacherConfig teacher;
    LabelTemplate label_template = LabelTemplate::Compact;
    RemoteEndpointConfig remote;
    std::string mentor_preset = "student";
    TrainHyperparameters mentor_train;
    std::string student_preset = "micro";
    DistillHyperparameters student;
    long student_steps = 1500;  // fixed optimizer-step budget; 0 = use student epochs
    AugmentOptions augment;
    EvalSettings eval;
    SweepSettings sweep;

    RunConfig();
    void validate() const;
};

// Applies one key. Throws ConfigError for unknown keys or ill-typed values.
void set_config_key(RunConfig& config, const std::string& key, const ConfigValue& value);
void apply_config(RunConfig& config, const ConfigTable& table);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its current value, in a stable order.
std::vector<std::pair<std::string, ConfigValue>> config_entries(const RunConfig& config);
std::string to_toml(const RunConfig& config);

}  // namespace mentorkd
