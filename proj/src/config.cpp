#include "mentorkd/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "mentorkd/error.hpp"
#include "mentorkd/model.hpp"

namespace mentorkd {

namespace {

// ---------------- parsing ----------------

class Parser {
public:
    Parser(const std::string& text, std::string origin) : text_(text), origin_(std::move(origin)) {}

    ConfigTable parse() {
        ConfigTable table;
        std::string section;
        while (true) {
            skip_blank_lines();
            if (at_end()) {
                break;
            }
            if (peek() == '[') {
                ++pos_;
                skip_spaces();
                section = bare_key();
                skip_spaces();
                expect(']');
                end_of_line();
                continue;
            }
            const std::string key = bare_key();
            skip_spaces();
            expect('=');
            skip_spaces();
            ConfigValue value = parse_value();
            end_of_line();
            const std::string full = section.empty() ? key : section + "." + key;
            if (!table.emplace(full, std::move(value)).second) {
                fail("duplicate key '" + full + "'");
            }
        }
        return table;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        int line = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
            line += text_[i] == '\n' ? 1 : 0;
        }
        throw ConfigError(origin_ + ": line " + std::to_string(line) + ": " + msg);
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void skip_spaces() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) {
            ++pos_;
        }
    }
    void skip_comment() {
        if (peek() == '#') {
            while (!at_end() && peek() != '\n') {
                ++pos_;
            }
        }
    }
    // whitespace, newlines and comments (used inside arrays and between statements)
    void skip_blank_lines() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') {
                ++pos_;
            } else {
                break;
            }
        }
    }
    void end_of_line() {
        skip_spaces();
        skip_comment();
        if (peek() == '\r') {
            ++pos_;
        }
        if (!at_end() && peek() != '\n') {
            fail(std::string("unexpected '") + peek() + "'");
        }
    }
    void expect(char c) {
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    std::string bare_key() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            ++pos_;
        }
        if (pos_ == start) {
            fail("expected a key");
        }
        return text_.substr(start, pos_ - start);
    }

    ConfigValue parse_value() {
        const char c = peek();
        if (c == '"') {
            return {parse_string()};
        }
        if (c == '[') {
            ++pos_;
            ConfigValue::Array items;
            skip_blank_lines();
            while (peek() != ']') {
                items.push_back(parse_value());
                skip_blank_lines();
                if (peek() == ',') {
                    ++pos_;
                    skip_blank_lines();
                } else if (peek() != ']') {
                    fail("expected ',' or ']' in array");
                }
            }
            ++pos_;
            return {std::move(items)};
        }
        const std::size_t start = pos_;
        while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
               peek() != '#') {
            ++pos_;
        }
        const std::string token = text_.substr(start, pos_ - start);
        if (token == "true") {
            return {true};
        }
        if (token == "false") {
            return {false};
        }
        if (token.empty()) {
            fail("expected a value");
        }
        std::string digits;
        for (char ch : token) {
            if (ch != '_') {
                digits += ch;
            }
        }
        if (digits.find_first_of(".eE") == std::string::npos) {
            std::int64_t v = 0;
            const auto* first = digits.data() + (digits[0] == '+' ? 1 : 0);
            const auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), v);
            if (ec == std::errc() && ptr == digits.data() + digits.size()) {
                return {v};
            }
        } else {
            double v = 0;
            const auto* first = digits.data() + (digits[0] == '+' ? 1 : 0);
            const auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), v);
            if (ec == std::errc() && ptr == digits.data() + digits.size()) {
                return {v};
            }
        }
        fail("cannot parse value '" + token + "'");
    }

    std::string parse_string() {
        expect('"');
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') {
                fail("unterminated string");
            }
            const char c = text_[pos_++];
            if (c == '"') {
                return out;
            }
            if (c != '\\') {
                out += c;
                continue;
            }
            const char e = at_end() ? '\0' : text_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(std::string("unsupported escape '\\") + e + "'");
            }
        }
    }

    const std::string& text_;
    std::string origin_;
    std::size_t pos_ = 0;
};

// ---------------- typed access ----------------

const char* type_name(const ConfigValue& v) {
    switch (v.data.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "float";
        case 3: return "string";
        default: return "array";
    }
}

[[noreturn]] void type_error(const std::string& key, const char* wanted, const ConfigValue& v) {
    throw ConfigError("config key '" + key + "' expects " + wanted + ", got " + type_name(v));
}

double as_double(const std::string& key, const ConfigValue& v) {
    if (const auto* d = std::get_if<double>(&v.data)) {
        return *d;
    }
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) {
        return static_cast<double>(*i);
    }
    type_error(key, "a number", v);
}

std::int64_t as_int(const std::string& key, const ConfigValue& v, std::int64_t lo, std::int64_t hi) {
    const auto* i = std::get_if<std::int64_t>(&v.data);
    if (i == nullptr) {
        type_error(key, "an integer", v);
    }
    if (*i < lo || *i > hi) {
        throw ConfigError("config key '" + key + "' is out of range: " + std::to_string(*i));
    }
    return *i;
}

std::string as_string(const std::string& key, const ConfigValue& v) {
    const auto* s = std::get_if<std::string>(&v.data);
    if (s == nullptr) {
        type_error(key, "a string", v);
    }
    return *s;
}

const ConfigValue::Array& as_array(const std::string& key, const ConfigValue& v) {
    const auto* a = std::get_if<ConfigValue::Array>(&v.data);
    if (a == nullptr) {
        type_error(key, "an array", v);
    }
    return *a;
}

struct Field {
    std::string key;
    std::function<ConfigValue(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const ConfigValue&)> set;
};

template <class Access>
Field real(std::string key, Access access) {
    return {std::move(key), [access](const RunConfig& c) { return ConfigValue{access(const_cast<RunConfig&>(c))}; },
            [access](RunConfig& c, const std::string& k, const ConfigValue& v) { access(c) = as_double(k, v); }};
}

template <class Access>
Field integer(std::string key, Access access) {
    using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
    const std::int64_t lo = std::is_unsigned_v<T> ? 0 : static_cast<std::int64_t>(std::numeric_limits<T>::min());
    const std::int64_t hi = std::numeric_limits<T>::max() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())
                                ? std::numeric_limits<std::int64_t>::max()
                                : static_cast<std::int64_t>(std::numeric_limits<T>::max());
    return {std::move(key),
            [access](const RunConfig& c) {
                return ConfigValue{static_cast<std::int64_t>(access(const_cast<RunConfig&>(c)))};
            },
            [access, lo, hi](RunConfig& c, const std::string& k, const ConfigValue& v) {
                access(c) = static_cast<T>(as_int(k, v, lo, hi));
            }};
}

template <class Access>
Field text(std::string key, Access access) {
    return {std::move(key), [access](const RunConfig& c) { return ConfigValue{access(const_cast<RunConfig&>(c))}; },
            [access](RunConfig& c, const std::string& k, const ConfigValue& v) { access(c) = as_string(k, v); }};
}

// enum-like fields stored via to_string / parse
template <class Access, class Parse>
Field named(std::string key, Access access, Parse parse) {
    return {std::move(key),
            [access](const RunConfig& c) { return ConfigValue{to_string(access(const_cast<RunConfig&>(c)))}; },
            [access, parse](RunConfig& c, const std::string& k, const ConfigValue& v) {
                access(c) = parse(as_string(k, v));
            }};
}

template <class T, class Access, class Convert>
Field list(std::string key, Access access, Convert convert) {
    return {std::move(key),
            [access](const RunConfig& c) {
                ConfigValue::Array out;
                for (const auto& x : access(const_cast<RunConfig&>(c))) {
                    if constexpr (std::is_same_v<T, std::string> || std::is_same_v<T, double>) {
                        out.push_back(ConfigValue{x});
                    } else if constexpr (std::is_enum_v<T>) {
                        out.push_back(ConfigValue{to_string(x)});
                    } else {
                        out.push_back(ConfigValue{static_cast<std::int64_t>(x)});
                    }
                }
                return ConfigValue{std::move(out)};
            },
            [access, convert](RunConfig& c, const std::string& k, const ConfigValue& v) {
                std::vector<T> out;
                for (const auto& item : as_array(k, v)) {
                    out.push_back(convert(k, item));
                }
                access(c) = std::move(out);
            }};
}

#define ACCESS(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        const auto u64 = [](const std::string& k, const ConfigValue& v) {
            return static_cast<std::uint64_t>(as_int(k, v, 0, std::numeric_limits<std::int64_t>::max()));
        };
        const auto i32 = [](const std::string& k, const ConfigValue& v) {
            return static_cast<int>(as_int(k, v, 0, std::numeric_limits<int>::max()));
        };
        const auto str = [](const std::string& k, const ConfigValue& v) { return as_string(k, v); };
        std::vector<Field> f;
        f.push_back(integer("seed", ACCESS(seed)));

        f.push_back(named("data.task", ACCESS(data.task), parse_task_kind));
        f.push_back(integer("data.train_size", ACCESS(data.train_size)));
        f.push_back(integer("data.test_size", ACCESS(data.test_size)));
        f.push_back(integer("data.difficulty", ACCESS(data.difficulty)));
        f.push_back(integer("data.seed", ACCESS(data.seed)));
        f.push_back(real("data.fraction", ACCESS(data.fraction)));

        f.push_back(text("teacher.kind", ACCESS(teacher_kind)));
        f.push_back(real("teacher.corruption_rate", ACCESS(teacher.corruption_rate)));
        f.push_back(list<CorruptionMode>("teacher.corruption_modes", ACCESS(teacher.corruption_modes),
                                         [](const std::string& k, const ConfigValue& v) {
                                             return parse_corruption_mode(as_string(k, v));
                                         }));
        f.push_back(integer("teacher.annotations_per_question", ACCESS(teacher.annotations_per_question)));
        f.push_back(named("teacher.label_template", ACCESS(label_template), parse_label_template));

        f.push_back(text("remote.url", ACCESS(remote.url)));
        f.push_back(text("remote.model", ACCESS(remote.model)));
        f.push_back(real("remote.temperature", ACCESS(remote.temperature)));
        f.push_back(integer("remote.max_attempts", ACCESS(remote.max_attempts)));
        f.push_back(real("remote.backoff_base_seconds", ACCESS(remote.backoff_base_seconds)));
        f.push_back(real("remote.backoff_factor", ACCESS(remote.backoff_factor)));
        f.push_back(real("remote.requests_per_minute", ACCESS(remote.requests_per_minute)));
        f.push_back(integer("remote.max_in_flight", ACCESS(remote.max_in_flight)));
        f.push_back(real("remote.timeout_seconds", ACCESS(remote.timeout_seconds)));
        f.push_back(text("remote.api_key_env", ACCESS(remote.api_key_env)));

        f.push_back(text("mentor.preset", ACCESS(mentor_preset)));
        f.push_back(integer("mentor.epochs", ACCESS(mentor_train.epochs)));
        f.push_back(integer("mentor.batch_size", ACCESS(mentor_train.batch_size)));
        f.push_back(real("mentor.learning_rate", ACCESS(mentor_train.learning_rate)));
        f.push_back(real("mentor.weight_decay", ACCESS(mentor_train.weight_decay)));
        f.push_back(real("mentor.warmup_fraction", ACCESS(mentor_train.warmup_fraction)));
        f.push_back(integer("mentor.max_steps", ACCESS(mentor_train.max_steps)));

        f.push_back(text("student.preset", ACCESS(student_preset)));
        f.push_back(real("student.lambda", ACCESS(student.lambda)));
        f.push_back(real("student.temperature", ACCESS(student.temperature)));
        f.push_back(named("student.ablation", ACCESS(student.ablation), parse_ablation));
        f.push_back(integer("student.epochs", ACCESS(student.train.epochs)));
        f.push_back(integer("student.batch_size", ACCESS(student.train.batch_size)));
        f.push_back(real("student.learning_rate", ACCESS(student.train.learning_rate)));
        f.push_back(real("student.weight_decay", ACCESS(student.train.weight_decay)));
        f.push_back(real("student.warmup_fraction", ACCESS(student.train.warmup_fraction)));
        f.push_back(integer("student.steps", ACCESS(student_steps)));

        f.push_back(integer("augment.degree", ACCESS(student.augmentation_degree)));
        f.push_back(real("augment.sampling_temperature", ACCESS(augment.sampling_temperature)));
        f.push_back(integer("augment.max_new_tokens", ACCESS(augment.max_new_tokens)));

        f.push_back(integer("eval.max_new_tokens", ACCESS(eval.max_new_tokens)));
        f.push_back(integer("eval.train_probe", ACCESS(eval.train_probe)));
        f.push_back(integer("eval.interval_steps", ACCESS(eval.interval_steps)));

        f.push_back(list<std::uint64_t>("sweep.seeds", ACCESS(sweep.seeds), u64));
        f.push_back(list<int>("sweep.degrees", ACCESS(sweep.degrees), i32));
        f.push_back(list<double>("sweep.fractions", ACCESS(sweep.fractions), as_double));
        f.push_back(list<double>("sweep.lambdas", ACCESS(sweep.lambdas), as_double));
        f.push_back(list<std::string>("sweep.mentor_presets", ACCESS(sweep.mentor_presets), str));
        f.push_back(integer("sweep.workers", ACCESS(sweep.workers)));
        f.push_back(text("sweep.results_dir", ACCESS(sweep.results_dir)));
        return f;
    }();
    return table;
}

#undef ACCESS

}  // namespace

ConfigTable parse_config_text(const std::string& text, const std::string& origin) {
    return Parser(text, origin).parse();
}

ConfigTable parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

std::string render_config_value(const ConfigValue& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[64];
                const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
                std::string s(buf, ptr);
                if (s.find_first_of(".eEn") == std::string::npos) {
                    s += ".0";  // keep it a float on re-read
                }
                return s;
            } else if constexpr (std::is_same_v<T, std::string>) {
                std::string out = "\"";
                for (char c : v) {
                    if (c == '"' || c == '\\') {
                        out += '\\';
                        out += c;
                    } else if (c == '\n') {
                        out += "\\n";
                    } else if (c == '\t') {
                        out += "\\t";
                    } else {
                        out += c;
                    }
                }
                return out + "\"";
            } else {
                std::string out = "[";
                for (std::size_t i = 0; i < v.size(); ++i) {
                    out += (i ? ", " : "") + render_config_value(v[i]);
                }
                return out + "]";
            }
        },
        value.data);
}

RunConfig::RunConfig() {
    teacher.corruption_rate = 0.4;
    teacher.annotations_per_question = 1;
    mentor_train.epochs = 30;
    mentor_train.learning_rate = 2e-3;
    student.train.learning_rate = 3e-3;
}

void RunConfig::validate() const {
    if (data.train_size < 1 || data.test_size < 1) {
        throw ConfigError("data.train_size and data.test_size must be positive");
    }
    const auto [lo, hi] = difficulty_bounds(data.task);
    if (data.difficulty < lo || data.difficulty > hi) {
        throw ConfigError("data.difficulty must be within [" + std::to_string(lo) + ", " + std::to_string(hi) + "] for " +
                          to_string(data.task));
    }
    if (!(data.fraction > 0.0 && data.fraction <= 1.0)) {
        throw ConfigError("data.fraction must be in (0, 1]");
    }
    if (teacher_kind != "oracle" && teacher_kind != "remote") {
        throw ConfigError("teacher.kind must be 'oracle' or 'remote', got '" + teacher_kind + "'");
    }
    teacher.validate();
    ModelConfig::preset(mentor_preset);
    ModelConfig::preset(student_preset);
    mentor_train.validate();
    student.validate();
    if (student_steps < 0) {
        throw ConfigError("student.steps must be non-negative");
    }
    if (augment.max_new_tokens < 1 || eval.max_new_tokens < 1) {
        throw ConfigError("max_new_tokens must be positive");
    }
    if (!(augment.sampling_temperature > 0.0)) {
        throw ConfigError("augment.sampling_temperature must be positive");
    }
    if (sweep.seeds.empty()) {
        throw ConfigError("sweep.seeds must not be empty");
    }
    for (std::size_t i = 0; i < sweep.seeds.size(); ++i) {
        for (std::size_t j = i + 1; j < sweep.seeds.size(); ++j) {
            if (sweep.seeds[i] == sweep.seeds[j]) {
                throw ConfigError("sweep.seeds contains " + std::to_string(sweep.seeds[i]) + " twice");
            }
        }
    }
    for (int d : sweep.degrees) {
        if (d < 0) {
            throw ConfigError("sweep.degrees must be non-negative");
        }
    }
    for (double f : sweep.fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw ConfigError("sweep.fractions must lie in (0, 1]");
        }
    }
    for (double l : sweep.lambdas) {
        if (!(l >= 0.0 && l <= 1.0)) {
            throw ConfigError("sweep.lambdas must lie in [0, 1]");
        }
    }
    for (const auto& p : sweep.mentor_presets) {
        ModelConfig::preset(p);
    }
    if (sweep.workers < 1) {
        throw ConfigError("sweep.workers must be at least 1");
    }
}

void set_config_key(RunConfig& config, const std::string& key, const ConfigValue& value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(config, key, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

void apply_config(RunConfig& config, const ConfigTable& table) {
    for (const auto& [key, value] : table) {
        set_config_key(config, key, value);
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    RunConfig config;
    apply_config(config, parse_config_file(path));
    config.validate();
    return config;
}

std::vector<std::pair<std::string, ConfigValue>> config_entries(const RunConfig& config) {
    std::vector<std::pair<std::string, ConfigValue>> out;
    for (const auto& f : fields()) {
        out.emplace_back(f.key, f.get(config));
    }
    return out;
}

std::string to_toml(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& [key, value] : config_entries(config)) {
        const auto dot = key.find('.');
        const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
        const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        if (sec != section) {
            out += "\n[" + sec + "]\n";
            section = sec;
        }
        out += name + " = " + render_config_value(value) + "\n";
    }
    return out;
}

}  // namespace mentorkd
