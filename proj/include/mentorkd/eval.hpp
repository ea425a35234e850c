#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mentorkd/model.hpp"
#include "mentorkd/tasks.hpp"

namespace mentorkd {

struct EvalRecord {
    std::int64_t question_id = 0;
    std::string prediction;
    std::string gold;
    bool correct = false;

    bool operator==(const EvalRecord&) const = default;
};

struct EvalReport {
    TaskKind task = TaskKind::LastLetter;
    std::size_t split_size = 0;
    double accuracy = 0.0;
    std::vector<EvalRecord> records;

    std::size_t correct_count() const;
    bool operator==(const EvalReport&) const = default;
};

// Throws DataError listing the ids of test records whose question text also
// appears in the training records.
void check_disjoint(std::span<const QuestionRecord> train, std::span<const QuestionRecord> test);

// Greedy decoding, final-answer extraction, exact match.
EvalReport evaluate(const TinyTransformer& model, std::span<const QuestionRecord> records, int max_new_tokens = 128);

// Same, after checking the test records against the training questions.
EvalReport evaluate(const TinyTransformer& model, std::span<const QuestionRecord> records,
                    std::span<const QuestionRecord> train_records, int max_new_tokens = 128);

void save_eval_report(const EvalReport& report, const std::filesystem::path& path);
// Rejects reports whose accuracy disagrees with the per-example flags.
EvalReport load_eval_report(const std::filesystem::path& path);

}  // namespace mentorkd
