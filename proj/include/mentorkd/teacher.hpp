#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mentorkd/rng.hpp"
#include "mentorkd/tasks.hpp"

namespace mentorkd {

enum class AnnotationSource { Teacher, Mentor };

std::string to_string(AnnotationSource source);
AnnotationSource parse_annotation_source(std::string_view name);

struct CoTAnnotation {
    std::int64_t question_id = 0;
    std::string rationale;
    std::string prediction;  // normalized
    AnnotationSource source = AnnotationSource::Teacher;
    bool correct = false;

    bool operator==(const CoTAnnotation&) const = default;
};

enum class CorruptionMode { WrongFinalAnswer, InconsistentFinalAnswer, TruncatedRationale };

std::string to_string(CorruptionMode mode);
CorruptionMode parse_corruption_mode(std::string_view name);

struct TeacherConfig {
    double corruption_rate = 0.0;
    std::vector<CorruptionMode> corruption_modes = {CorruptionMode::WrongFinalAnswer,
                                                    CorruptionMode::InconsistentFinalAnswer,
                                                    CorruptionMode::TruncatedRationale};
    std::uint64_t seed = 0;
    int annotations_per_question = 6;

    void validate() const;
};

// A normalized answer for `kind` that differs from `gold`.
std::string plausible_wrong_answer(TaskKind kind, const std::string& gold, Rng& rng);

// Simulated teacher: annotations_per_question annotations per instance, each one
// independently corrupted with probability corruption_rate. Output is grouped by
// instance in input order, then by annotation index.
std::vector<CoTAnnotation> annotate_oracle(std::span<const TaskInstance> instances, const TeacherConfig& config);

// ---- remote two-stage zero-shot CoT ----

struct RemoteEndpointConfig {
    std::string url;  // e.g. https://api.openai.com/v1/chat/completions
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.7;
    int max_attempts = 5;
    double backoff_base_seconds = 1.0;
    double backoff_factor = 2.0;
    double requests_per_minute = 60.0;
    int max_in_flight = 4;
    double timeout_seconds = 60.0;
    std::string api_key_env = "MENTORKD_API_KEY";
};

struct RequestAttempt {
    std::int64_t question_id = 0;
    int stage = 0;    // 1 = rationale, 2 = answer extraction
    int attempt = 0;  // 1-based
    int status = 0;   // HTTP status, 0 for transport failure
    double started_at = 0.0;  // seconds since the batch started
};

struct RemoteFailure {
    std::int64_t question_id = 0;
    std::string reason;
};

struct RemoteAnnotationResult {
    std::vector<CoTAnnotation> annotations;  // ordered by question id
    std::vector<RemoteFailure> failures;
    std::vector<RequestAttempt> attempts;
};

std::string first_stage_prompt(std::string_view question);
std::string second_stage_prompt(std::string_view question, std::string_view rationale);

// Throws ConfigError when the credential variable is unset.
RemoteAnnotationResult annotate_remote(std::span<const QuestionRecord> records, const RemoteEndpointConfig& endpoint);

}  // namespace mentorkd
