#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mentorkd {

enum class TaskKind { LastLetter, ShuffledObjects, ChainArithmetic };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct QuestionRecord {
    std::int64_t id = 0;
    std::string question;
    std::string gold_answer;  // already normalized
    TaskKind task = TaskKind::LastLetter;

    bool operator==(const QuestionRecord&) const = default;
};

struct GoldRationale {
    std::vector<std::string> steps;
    std::string final_answer;
    // Normalized answer implied by the state after each step; back() == final_answer.
    std::vector<std::string> partial_answers;

    bool operator==(const GoldRationale&) const = default;
};

struct TaskInstance {
    QuestionRecord record;
    GoldRationale rationale;

    bool operator==(const TaskInstance&) const = default;
};

// Inclusive difficulty bounds. LastLetter counts words, ShuffledObjects counts
// swaps (fixed at 3 over 3 objects), ChainArithmetic counts operands.
std::pair<int, int> difficulty_bounds(TaskKind kind);

// n distinct questions; ids are id_base, id_base+1, ...
std::vector<TaskInstance> generate_dataset(TaskKind kind, int n, std::uint64_t seed, int difficulty,
                                           std::int64_t id_base = 0);

// Disjoint train/test splits: the test split draws from a separate seed stream and
// skips any question text already present in the training split.
struct DatasetSplits {
    std::vector<TaskInstance> train;
    std::vector<TaskInstance> test;
};
DatasetSplits generate_splits(TaskKind kind, int n_train, int n_test, std::uint64_t seed, int difficulty);

// Instance builders with explicit content; generate_dataset samples their arguments.
TaskInstance make_last_letter(std::int64_t id, const std::vector<std::string>& words);
// initial_colors[i] is held by person i; swaps are 0-based person index pairs.
TaskInstance make_shuffled_objects(std::int64_t id, const std::vector<std::string>& initial_colors,
                                   const std::vector<std::pair<int, int>>& swaps, int asked_person);
// ops[i] is '+' or '-' and joins operands[i] and operands[i+1].
TaskInstance make_chain_arithmetic(std::int64_t id, const std::vector<int>& operands, const std::vector<char>& ops);

// Rationale steps joined by spaces, without a concluding sentence.
std::string render_steps(const std::vector<std::string>& steps);

// Full teacher-style rationale: steps followed by "Therefore, the answer is {y}."
std::string render(TaskKind kind, const GoldRationale& rationale);
std::string render_with_answer(const std::vector<std::string>& steps, std::string_view answer);

// Surface form of a normalized answer as it appears in text ("a" -> "(A)" for
// multiple choice); normalize_answer maps it back.
std::string display_answer(TaskKind kind, std::string_view normalized);

std::string normalize_answer(TaskKind kind, std::string_view raw);

inline constexpr std::string_view kVerboseMarker = "Therefore, the answer is";
inline constexpr std::string_view kCompactMarker = "-->";

std::string extract_final_answer(TaskKind kind, std::string_view generation);

// Every character the generators and label templates can emit for a task.
std::string task_alphabet(TaskKind kind);

// Names used by the shuffled-objects template.
inline constexpr std::string_view kPlayers[3] = {"Alice", "Bob", "Claire"};

}  // namespace mentorkd
