#include "mentorkd/tasks.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <unordered_set>

#include "mentorkd/error.hpp"
#include "mentorkd/rng.hpp"

namespace mentorkd {

namespace {

constexpr std::array<std::string_view, 150> kNames = {
    "Dino",    "Toby",    "Abigail", "Manuela", "Adrian",  "Agnes",   "Alma",    "Amber",   "Andre",   "Anika",
    "Arlo",    "Astrid",  "Beatrix", "Bella",   "Bernard", "Bianca",  "Boris",   "Bruno",   "Calvin",  "Camila",
    "Carmen",  "Cecil",   "Celine",  "Chloe",   "Cody",    "Cyrus",   "Dalia",   "Damon",   "Daphne",  "Derek",
    "Diego",   "Dolores", "Dora",    "Dustin",  "Edgar",   "Edith",   "Elena",   "Elias",   "Elmer",   "Enzo",
    "Esther",  "Ezra",    "Fabian",  "Felix",   "Fiona",   "Flora",   "Freya",   "Gavin",   "Gemma",   "Gideon",
    "Gina",    "Gordon",  "Greta",   "Gwen",    "Hector",  "Helga",   "Hilda",   "Hugo",    "Ida",     "Igor",
    "Imani",   "Ingrid",  "Irene",   "Isaac",   "Ivan",    "Jacob",   "Jade",    "Jasper",  "Joanna",  "Jonah",
    "Judith",  "Julius",  "Kai",     "Karim",   "Katja",   "Keith",   "Kiara",   "Kurt",    "Lara",    "Leif",
    "Lena",    "Leon",    "Lucia",   "Lydia",   "Magnus",  "Malik",   "Marco",   "Mateo",   "Maxine",  "Milan",
    "Miriam",  "Nadia",   "Nestor",  "Nico",    "Nora",    "Odette",  "Olaf",    "Omar",    "Oscar",   "Otto",
    "Pablo",   "Petra",   "Philip",  "Pia",     "Priya",   "Quentin", "Quinn",   "Rafael",  "Ramona",  "Reed",
    "Rhea",    "Rocco",   "Rosa",    "Rufus",   "Sabine",  "Sami",    "Selma",   "Serena",  "Silas",   "Sonja",
    "Stella",  "Tamsin",  "Teodor",  "Thea",    "Tobias",  "Troy",    "Ulrich",  "Uma",     "Ursula",  "Valeria",
    "Vera",    "Victor",  "Vivian",  "Walter",  "Wanda",   "Wendell", "Xander",  "Xenia",   "Yara",    "Yosef",
    "Yusuf",   "Zack",    "Zara",    "Zelda",   "Zeno",    "Zoltan",  "Ansel",   "Britt",   "Cosmo",   "Dagny",
};

constexpr std::array<std::string_view, 10> kColors = {
    "red", "pink", "black", "blue", "green", "white", "yellow", "orange", "purple", "brown",
};

constexpr std::array<std::string_view, 3> kOrdinals = {"first", "second", "third"};

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim_if(std::string_view s, bool (*pred)(char)) {
    while (!s.empty() && pred(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && pred(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

bool is_strip_char(char c) {
    static constexpr std::string_view kPunct = ".,;:!?\"'`()[]{}";
    return is_space(c) || kPunct.find(c) != std::string_view::npos;
}

bool is_trailing_punct(char c) {
    static constexpr std::string_view kPunct = ".,;:!?\"'`";
    return is_space(c) || kPunct.find(c) != std::string_view::npos;
}

bool is_lower_alpha(char c) {
    return c >= 'a' && c <= 'z';
}

std::string normalize_multiple_choice(std::string_view raw) {
    const std::string text = lower(trim_if(raw, is_trailing_punct));
    const std::string_view t = text;
    // "(a)", "a", "(a", "a)"
    const std::string_view bare = trim_if(t, [](char c) { return c == '(' || c == ')'; });
    if (bare.size() == 1 && is_lower_alpha(bare[0])) {
        return std::string(bare);
    }
    // "(a) red ball"
    if (t.size() >= 4 && t[0] == '(' && is_lower_alpha(t[1]) && t[2] == ')' && is_space(t[3])) {
        return std::string(1, t[1]);
    }
    // "a) red ball", "a. red ball", "a: red ball"
    if (t.size() >= 3 && is_lower_alpha(t[0]) && (t[1] == ')' || t[1] == '.' || t[1] == ':') && is_space(t[2])) {
        return std::string(1, t[0]);
    }
    return {};
}

std::string normalize_integer(std::string_view raw) {
    std::string_view t = trim_if(raw, is_strip_char);
    bool negative = false;
    if (!t.empty() && (t.front() == '-' || t.front() == '+')) {
        negative = t.front() == '-';
        t.remove_prefix(1);
    }
    // tolerate a zero fractional part ("7.0")
    if (const auto dot = t.find('.'); dot != std::string_view::npos) {
        const auto frac = t.substr(dot + 1);
        if (frac.empty() || !std::all_of(frac.begin(), frac.end(), [](char c) { return c == '0'; })) {
            return {};
        }
        t = t.substr(0, dot);
    }
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return {};
    }
    while (t.size() > 1 && t.front() == '0') {
        t.remove_prefix(1);
    }
    if (t == "0") {
        negative = false;
    }
    return (negative ? "-" : "") + std::string(t);
}

std::string normalize_letters(std::string_view raw) {
    std::string t = lower(trim_if(raw, is_strip_char));
    if (t.empty() || !std::all_of(t.begin(), t.end(), is_lower_alpha)) {
        return {};
    }
    return t;
}

std::string choice_letter(int index) {
    return std::string(1, static_cast<char>('a' + index));
}

std::string last_letter_question(const std::vector<std::string>& words) {
    std::string joined;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) {
            joined += ' ';
        }
        joined += words[i];
    }
    return "Take the last letters of each words in \"" + joined + "\" and concatenate them.";
}

std::string holdings(const std::vector<std::string>& holding) {
    return std::string(kPlayers[0]) + " has a " + holding[0] + " ball, " + std::string(kPlayers[1]) + " has a " +
           holding[1] + " ball, " + std::string(kPlayers[2]) + " has a " + holding[2] + " ball";
}

std::string sign_op(int value, char op, int operand) {
    return std::to_string(value) + " " + op + " " + std::to_string(operand);
}

}  // namespace

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::LastLetter:
            return "last_letter";
        case TaskKind::ShuffledObjects:
            return "shuffled_objects";
        case TaskKind::ChainArithmetic:
            return "chain_arithmetic";
    }
    return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
    if (name == "last_letter") {
        return TaskKind::LastLetter;
    }
    if (name == "shuffled_objects") {
        return TaskKind::ShuffledObjects;
    }
    if (name == "chain_arithmetic") {
        return TaskKind::ChainArithmetic;
    }
    throw ConfigError("unknown task kind '" + std::string(name) +
                      "' (expected last_letter, shuffled_objects or chain_arithmetic)");
}

std::pair<int, int> difficulty_bounds(TaskKind kind) {
    switch (kind) {
        case TaskKind::LastLetter:
            return {2, 6};
        case TaskKind::ShuffledObjects:
            return {3, 3};
        case TaskKind::ChainArithmetic:
            return {2, 4};
    }
    return {0, 0};
}

std::string render_steps(const std::vector<std::string>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += steps[i];
    }
    return out;
}

std::string render_with_answer(const std::vector<std::string>& steps, std::string_view answer) {
    std::string out = render_steps(steps);
    if (!out.empty() && out.back() != '.') {
        out += '.';
    }
    if (!out.empty()) {
        out += ' ';
    }
    out += kVerboseMarker;
    out += ' ';
    out += answer;
    out += '.';
    return out;
}

std::string display_answer(TaskKind kind, std::string_view normalized) {
    if (kind == TaskKind::ShuffledObjects && normalized.size() == 1) {
        return "(" + std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(normalized[0])))) + ")";
    }
    return std::string(normalized);
}

std::string render(TaskKind kind, const GoldRationale& rationale) {
    return render_with_answer(rationale.steps, display_answer(kind, rationale.final_answer));
}

TaskInstance make_last_letter(std::int64_t id, const std::vector<std::string>& words) {
    TaskInstance inst;
    inst.record.id = id;
    inst.record.task = TaskKind::LastLetter;
    inst.record.question = last_letter_question(words);
    std::string answer;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const char last = static_cast<char>(std::tolower(static_cast<unsigned char>(words[i].back())));
        answer += last;
        inst.rationale.steps.push_back(std::to_string(i + 1) + ". " + std::string(1, last));
        inst.rationale.partial_answers.push_back(answer);
    }
    inst.record.gold_answer = answer;
    inst.rationale.final_answer = answer;
    return inst;
}

TaskInstance make_shuffled_objects(std::int64_t id, const std::vector<std::string>& initial_colors,
                                   const std::vector<std::pair<int, int>>& swaps, int asked_person) {
    if (initial_colors.size() != 3 || swaps.size() != 3 || asked_person < 0 || asked_person > 2) {
        throw ConfigError("shuffled objects needs 3 objects, 3 swaps and an asked person in [0, 3)");
    }
    const std::string_view asked = kPlayers[asked_person];
    std::string q = "Alice, Bob, and Claire are playing a game. At the start of the game, they are each holding a ball: ";
    q += std::string(kPlayers[0]) + " has a " + initial_colors[0] + " ball, " + std::string(kPlayers[1]) + " has a " +
         initial_colors[1] + " ball, and " + std::string(kPlayers[2]) + " has a " + initial_colors[2] + " ball. ";
    q += "As the game progresses, pairs of players trade balls. ";
    static constexpr std::array<std::string_view, 3> kLead = {"First", "Then", "Finally"};
    for (std::size_t i = 0; i < swaps.size(); ++i) {
        const auto [a, b] = swaps[i];
        if (a == b || a < 0 || b < 0 || a > 2 || b > 2) {
            throw ConfigError("invalid swap pair");
        }
        q += std::string(kLead[i]) + ", " + std::string(kPlayers[a]) + " and " + std::string(kPlayers[b]) +
             " swap balls. ";
    }
    q += "At the end of the game, " + std::string(asked) + " has which ball? Answer choices: ";
    for (int i = 0; i < 3; ++i) {
        q += "(" + std::string(1, static_cast<char>('A' + i)) + ") " + initial_colors[static_cast<std::size_t>(i)] +
             " ball";
        q += i < 2 ? ", " : ".";
    }

    TaskInstance inst;
    inst.record.id = id;
    inst.record.task = TaskKind::ShuffledObjects;
    inst.record.question = q;
    auto choice_of = [&](const std::vector<std::string>& holding) {
        const auto& color = holding[static_cast<std::size_t>(asked_person)];
        const auto it = std::find(initial_colors.begin(), initial_colors.end(), color);
        return choice_letter(static_cast<int>(it - initial_colors.begin()));
    };
    std::vector<std::string> holding = initial_colors;
    for (std::size_t i = 0; i < swaps.size(); ++i) {
        std::swap(holding[static_cast<std::size_t>(swaps[i].first)], holding[static_cast<std::size_t>(swaps[i].second)]);
        inst.rationale.steps.push_back("After the " + std::string(kOrdinals[i]) + " swap: " + holdings(holding) + ".");
        inst.rationale.partial_answers.push_back(choice_of(holding));
    }
    inst.record.gold_answer = choice_of(holding);
    inst.rationale.final_answer = inst.record.gold_answer;
    return inst;
}

TaskInstance make_chain_arithmetic(std::int64_t id, const std::vector<int>& operands, const std::vector<char>& ops) {
    if (operands.size() < 2 || ops.size() + 1 != operands.size()) {
        throw ConfigError("chain arithmetic needs at least 2 operands and one operator between each pair");
    }
    TaskInstance inst;
    inst.record.id = id;
    inst.record.task = TaskKind::ChainArithmetic;
    std::string expr = std::to_string(operands[0]);
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (ops[i] != '+' && ops[i] != '-') {
            throw ConfigError("chain arithmetic operators must be '+' or '-'");
        }
        expr += std::string(" ") + ops[i] + " " + std::to_string(operands[i + 1]);
    }
    inst.record.question = "What is " + expr + "?";
    int value = operands[0];
    inst.rationale.steps.push_back("Start with " + std::to_string(value) + ".");
    inst.rationale.partial_answers.push_back(std::to_string(value));
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const int next = ops[i] == '+' ? value + operands[i + 1] : value - operands[i + 1];
        inst.rationale.steps.push_back(sign_op(value, ops[i], operands[i + 1]) + " = " + std::to_string(next) + ".");
        value = next;
        inst.rationale.partial_answers.push_back(std::to_string(value));
    }
    inst.record.gold_answer = std::to_string(value);
    inst.rationale.final_answer = inst.record.gold_answer;
    return inst;
}

namespace {

TaskInstance sample_instance(TaskKind kind, int difficulty, Rng& rng, std::int64_t id) {
    switch (kind) {
        case TaskKind::LastLetter: {
            const auto picks = rng.sample_indices(kNames.size(), static_cast<std::size_t>(difficulty));
            std::vector<std::string> words;
            for (const auto p : picks) {
                words.emplace_back(kNames[p]);
            }
            return make_last_letter(id, words);
        }
        case TaskKind::ShuffledObjects: {
            const auto picks = rng.sample_indices(kColors.size(), 3);
            std::vector<std::string> colors;
            for (const auto p : picks) {
                colors.emplace_back(kColors[p]);
            }
            std::vector<std::pair<int, int>> swaps;
            for (int s = 0; s < difficulty; ++s) {
                const auto pair = rng.sample_indices(3, 2);
                swaps.emplace_back(static_cast<int>(pair[0]), static_cast<int>(pair[1]));
            }
            const int asked = static_cast<int>(rng.uniform_index(3));
            return make_shuffled_objects(id, colors, swaps, asked);
        }
        case TaskKind::ChainArithmetic: {
            std::vector<int> operands;
            std::vector<char> ops;
            for (int i = 0; i < difficulty; ++i) {
                operands.push_back(static_cast<int>(rng.uniform_index(21)));
                if (i > 0) {
                    ops.push_back(rng.bernoulli(0.5) ? '+' : '-');
                }
            }
            return make_chain_arithmetic(id, operands, ops);
        }
    }
    throw ConfigError("unknown task kind");
}

void check_difficulty(TaskKind kind, int difficulty) {
    const auto [lo, hi] = difficulty_bounds(kind);
    if (difficulty < lo || difficulty > hi) {
        throw ConfigError("difficulty " + std::to_string(difficulty) + " out of bounds for " + to_string(kind) +
                          ": must be within [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

std::vector<TaskInstance> generate_excluding(TaskKind kind, int n, std::uint64_t seed, int difficulty,
                                             std::int64_t id_base, const std::unordered_set<std::string>& exclude) {
    if (n < 1) {
        throw ConfigError("generate_dataset: n must be at least 1 (got " + std::to_string(n) + ")");
    }
    check_difficulty(kind, difficulty);
    Rng rng(derive_seed(seed, {tag_of(to_string(kind)), static_cast<std::uint64_t>(difficulty)}));
    std::vector<TaskInstance> out;
    out.reserve(static_cast<std::size_t>(n));
    std::unordered_set<std::string> seen;
    const std::size_t max_attempts = static_cast<std::size_t>(n) * 200 + 1000;
    std::size_t attempts = 0;
    while (out.size() < static_cast<std::size_t>(n)) {
        if (++attempts > max_attempts) {
            throw ConfigError("cannot generate " + std::to_string(n) + " distinct " + to_string(kind) +
                              " questions at difficulty " + std::to_string(difficulty));
        }
        auto inst = sample_instance(kind, difficulty, rng, id_base + static_cast<std::int64_t>(out.size()));
        if (exclude.contains(inst.record.question) || !seen.insert(inst.record.question).second) {
            continue;
        }
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace

std::vector<TaskInstance> generate_dataset(TaskKind kind, int n, std::uint64_t seed, int difficulty,
                                           std::int64_t id_base) {
    return generate_excluding(kind, n, seed, difficulty, id_base, {});
}

DatasetSplits generate_splits(TaskKind kind, int n_train, int n_test, std::uint64_t seed, int difficulty) {
    DatasetSplits splits;
    splits.train = generate_dataset(kind, n_train, derive_seed(seed, {tag_of("train")}), difficulty, 0);
    std::unordered_set<std::string> train_questions;
    for (const auto& inst : splits.train) {
        train_questions.insert(inst.record.question);
    }
    // test ids live in their own range so ids stay unique across splits
    const std::int64_t test_base = 1'000'000'000;
    splits.test = generate_excluding(kind, n_test, derive_seed(seed, {tag_of("test")}), difficulty, test_base,
                                     train_questions);
    return splits;
}

std::string normalize_answer(TaskKind kind, std::string_view raw) {
    switch (kind) {
        case TaskKind::LastLetter:
            return normalize_letters(raw);
        case TaskKind::ShuffledObjects:
            return normalize_multiple_choice(raw);
        case TaskKind::ChainArithmetic:
            return normalize_integer(raw);
    }
    return {};
}

std::string extract_final_answer(TaskKind kind, std::string_view generation) {
    const auto verbose = generation.rfind(kVerboseMarker);
    const auto compact = generation.rfind(kCompactMarker);
    std::size_t start = std::string_view::npos;
    if (verbose != std::string_view::npos) {
        start = verbose + kVerboseMarker.size();
    }
    if (compact != std::string_view::npos && (verbose == std::string_view::npos || compact > verbose)) {
        start = compact + kCompactMarker.size();
    }
    if (start != std::string_view::npos) {
        return normalize_answer(kind, generation.substr(start));
    }
    std::string_view rest = trim_if(generation, is_space);
    const auto newline = rest.rfind('\n');
    if (newline != std::string_view::npos) {
        rest = rest.substr(newline + 1);
    }
    return normalize_answer(kind, rest);
}

std::string task_alphabet(TaskKind kind) {
    std::set<char> chars;
    auto add = [&chars](std::string_view s) { chars.insert(s.begin(), s.end()); };
    add(kVerboseMarker);
    add(kCompactMarker);
    add("0123456789 .,:;()?\"'-+=");
    add("abcdefghijklmnopqrstuvwxyz");
    switch (kind) {
        case TaskKind::LastLetter:
            for (const auto name : kNames) {
                add(name);
            }
            add(last_letter_question({"x"}));
            break;
        case TaskKind::ShuffledObjects: {
            add("ABC");
            for (const auto c : kColors) {
                add(c);
            }
            const auto inst = make_shuffled_objects(0, {"red", "pink", "black"}, {{0, 1}, {1, 2}, {0, 2}}, 0);
            add(inst.record.question);
            for (const auto& s : inst.rationale.steps) {
                add(s);
            }
            break;
        }
        case TaskKind::ChainArithmetic: {
            const auto inst = make_chain_arithmetic(0, {1, 2, 3}, {'+', '-'});
            add(inst.record.question);
            for (const auto& s : inst.rationale.steps) {
                add(s);
            }
            break;
        }
    }
    return {chars.begin(), chars.end()};
}

}  // namespace mentorkd
