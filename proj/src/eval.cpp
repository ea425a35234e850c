#include "mentorkd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "mentorkd/error.hpp"

namespace mentorkd {

std::size_t EvalReport::correct_count() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.correct; }));
}

void check_disjoint(std::span<const QuestionRecord> train, std::span<const QuestionRecord> test) {
    std::unordered_map<std::string, std::int64_t> seen;
    for (const auto& r : train) {
        seen.emplace(r.question, r.id);
    }
    std::vector<std::int64_t> offending;
    for (const auto& r : test) {
        if (seen.contains(r.question)) {
            offending.push_back(r.id);
        }
    }
    if (offending.empty()) {
        return;
    }
    std::string ids;
    for (std::size_t i = 0; i < offending.size(); ++i) {
        ids += (i ? ", " : "") + std::to_string(offending[i]);
    }
    throw DataError("evaluation split overlaps the training questions; offending test ids: " + ids);
}

EvalReport evaluate(const TinyTransformer& model, std::span<const QuestionRecord> records, int max_new_tokens) {
    EvalReport report;
    report.split_size = records.size();
    if (!records.empty()) {
        report.task = records.front().task;
    }
    std::vector<std::string> questions;
    for (const auto& r : records) {
        questions.push_back(r.question);
    }
    const std::vector<std::uint64_t> seeds(records.size(), 0);
    const auto outputs = generate_batch(model, questions, max_new_tokens, 0.0, seeds);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        EvalRecord e;
        e.question_id = records[i].id;
        e.gold = records[i].gold_answer;
        e.prediction = extract_final_answer(records[i].task, outputs[i]);
        e.correct = !e.prediction.empty() && e.prediction == e.gold;
        correct += e.correct ? 1 : 0;
        report.records.push_back(std::move(e));
    }
    report.accuracy = records.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(records.size());
    return report;
}

EvalReport evaluate(const TinyTransformer& model, std::span<const QuestionRecord> records,
                    std::span<const QuestionRecord> train_records, int max_new_tokens) {
    check_disjoint(train_records, records);
    return evaluate(model, records, max_new_tokens);
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["task"] = to_string(report.task);
    j["split_size"] = report.split_size;
    j["accuracy"] = report.accuracy;
    j["correct"] = report.correct_count();
    auto& rows = j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : report.records) {
        rows.push_back({{"question_id", r.question_id}, {"prediction", r.prediction}, {"gold", r.gold}, {"correct", r.correct}});
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

EvalReport load_eval_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    EvalReport report;
    try {
        const auto j = nlohmann::json::parse(in);
        report.task = parse_task_kind(j.at("task").get<std::string>());
        report.split_size = j.at("split_size").get<std::size_t>();
        report.accuracy = j.at("accuracy").get<double>();
        for (const auto& r : j.at("records")) {
            report.records.push_back({r.at("question_id").get<std::int64_t>(), r.at("prediction").get<std::string>(),
                                      r.at("gold").get<std::string>(), r.at("correct").get<bool>()});
        }
        if (j.at("correct").get<std::size_t>() != report.correct_count()) {
            throw DataError("correct count disagrees with the records");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (report.records.size() != report.split_size) {
        throw DataError(path.string() + ": split_size does not match the number of records");
    }
    const double recount = report.split_size == 0 ? 0.0
                                                  : static_cast<double>(report.correct_count()) /
                                                        static_cast<double>(report.split_size);
    if (report.accuracy != recount) {
        throw DataError(path.string() + ": accuracy does not match the per-example flags");
    }
    return report;
}

}  // namespace mentorkd
