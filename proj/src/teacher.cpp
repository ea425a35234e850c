#include "mentorkd/teacher.hpp"

#include <algorithm>

#include "mentorkd/error.hpp"

namespace mentorkd {

std::string to_string(AnnotationSource source) {
    return source == AnnotationSource::Teacher ? "teacher" : "mentor";
}

AnnotationSource parse_annotation_source(std::string_view name) {
    if (name == "teacher") {
        return AnnotationSource::Teacher;
    }
    if (name == "mentor") {
        return AnnotationSource::Mentor;
    }
    throw DataError("unknown annotation source '" + std::string(name) + "'");
}

std::string to_string(CorruptionMode mode) {
    switch (mode) {
        case CorruptionMode::WrongFinalAnswer:
            return "wrong_final_answer";
        case CorruptionMode::InconsistentFinalAnswer:
            return "inconsistent_final_answer";
        case CorruptionMode::TruncatedRationale:
            return "truncated_rationale";
    }
    return "unknown";
}

CorruptionMode parse_corruption_mode(std::string_view name) {
    for (const auto mode : {CorruptionMode::WrongFinalAnswer, CorruptionMode::InconsistentFinalAnswer,
                            CorruptionMode::TruncatedRationale}) {
        if (name == to_string(mode)) {
            return mode;
        }
    }
    throw ConfigError("unknown corruption mode '" + std::string(name) + "'");
}

void TeacherConfig::validate() const {
    if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) {
        throw ConfigError("teacher corruption_rate must be within [0, 1]");
    }
    if (annotations_per_question < 1) {
        throw ConfigError("teacher annotations_per_question must be at least 1");
    }
    if (corruption_rate > 0.0 && corruption_modes.empty()) {
        throw ConfigError("teacher corruption_rate > 0 requires at least one corruption mode");
    }
}

std::string plausible_wrong_answer(TaskKind kind, const std::string& gold, Rng& rng) {
    switch (kind) {
        case TaskKind::LastLetter: {
            if (gold.empty()) {
                return "x";
            }
            std::string wrong = gold;
            const auto pos = static_cast<std::size_t>(rng.uniform_index(wrong.size()));
            const auto shift = 1 + static_cast<int>(rng.uniform_index(25));
            wrong[pos] = static_cast<char>('a' + (wrong[pos] - 'a' + shift) % 26);
            return wrong;
        }
        case TaskKind::ShuffledObjects: {
            const int g = gold.size() == 1 ? gold[0] - 'a' : 0;
            const int shift = 1 + static_cast<int>(rng.uniform_index(2));
            return std::string(1, static_cast<char>('a' + (g + shift) % 3));
        }
        case TaskKind::ChainArithmetic: {
            long value = 0;
            try {
                value = std::stol(gold);
            } catch (const std::exception&) {
                value = 0;
            }
            const long delta = 1 + static_cast<long>(rng.uniform_index(3));
            return std::to_string(rng.bernoulli(0.5) ? value + delta : value - delta);
        }
    }
    return gold + "x";
}

namespace {

CoTAnnotation annotate_one(const TaskInstance& inst, int index, const TeacherConfig& config) {
    const auto& record = inst.record;
    const auto kind = record.task;
    Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(record.id), static_cast<std::uint64_t>(index)}));

    CoTAnnotation ann;
    ann.question_id = record.id;
    ann.source = AnnotationSource::Teacher;

    const bool corrupt = rng.bernoulli(config.corruption_rate);
    if (!corrupt) {
        ann.rationale = render(kind, inst.rationale);
        ann.prediction = record.gold_answer;
    } else {
        const auto mode = config.corruption_modes[rng.uniform_index(config.corruption_modes.size())];
        const auto wrong = plausible_wrong_answer(kind, record.gold_answer, rng);
        switch (mode) {
            case CorruptionMode::WrongFinalAnswer:
                ann.rationale = render_with_answer(inst.rationale.steps, display_answer(kind, wrong));
                ann.prediction = wrong;
                break;
            case CorruptionMode::InconsistentFinalAnswer:
                ann.rationale = render(kind, inst.rationale);
                ann.prediction = wrong;
                break;
            case CorruptionMode::TruncatedRationale: {
                const auto& steps = inst.rationale.steps;
                std::vector<std::string> kept(steps.begin(), steps.end() - 1);
                std::string prediction;
                const auto& partial = inst.rationale.partial_answers;
                if (partial.size() >= 2) {
                    prediction = partial[partial.size() - 2];
                }
                // The truncated state can coincide with the gold answer (e.g. "+ 0" last);
                // a corrupted annotation always carries a wrong prediction.
                if (prediction.empty() || prediction == record.gold_answer) {
                    prediction = wrong;
                }
                ann.rationale = render_with_answer(kept, display_answer(kind, prediction));
                ann.prediction = prediction;
                break;
            }
        }
    }
    ann.correct = ann.prediction == record.gold_answer;
    return ann;
}

}  // namespace

std::vector<CoTAnnotation> annotate_oracle(std::span<const TaskInstance> instances, const TeacherConfig& config) {
    config.validate();
    const auto per = static_cast<std::size_t>(config.annotations_per_question);
    std::vector<CoTAnnotation> out(instances.size() * per);
    const auto n = static_cast<std::int64_t>(instances.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < per; ++k) {
            out[static_cast<std::size_t>(i) * per + k] =
                annotate_one(instances[static_cast<std::size_t>(i)], static_cast<int>(k), config);
        }
    }
    return out;
}

std::string first_stage_prompt(std::string_view question) {
    return "Q: " + std::string(question) + ". A: Let's think step by step.";
}

std::string second_stage_prompt(std::string_view question, std::string_view rationale) {
    return first_stage_prompt(question) + " " + std::string(rationale) + " " + std::string(kVerboseMarker);
}

}  // namespace mentorkd
