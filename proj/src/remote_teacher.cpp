#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <thread>
#include <tuple>

#include <httplib.h>
#include <json.hpp>

#include "mentorkd/error.hpp"
#include "mentorkd/teacher.hpp"

namespace mentorkd {

namespace {

using Clock = std::chrono::steady_clock;

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("remote endpoint url must include a scheme: '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

// Spaces request starts at least 60/rpm seconds apart, across all workers.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute)
        : interval_(requests_per_minute > 0.0 ? std::chrono::duration_cast<Clock::duration>(
                                                    std::chrono::duration<double>(60.0 / requests_per_minute))
                                              : Clock::duration::zero()) {}

    void acquire() {
        Clock::time_point slot;
        {
            std::lock_guard lock(mutex_);
            slot = std::max(Clock::now(), next_);
            next_ = slot + interval_;
        }
        std::this_thread::sleep_until(slot);
    }

private:
    Clock::duration interval_;
    Clock::time_point next_{};
    std::mutex mutex_;
};

struct CallOutcome {
    std::optional<std::string> content;
    std::string error;
};

class RemoteSession {
public:
    RemoteSession(const RemoteEndpointConfig& endpoint, std::string api_key)
        : endpoint_(endpoint), url_(parse_url(endpoint.url)), api_key_(std::move(api_key)),
          limiter_(endpoint.requests_per_minute), start_(Clock::now()) {}

    CallOutcome complete(std::int64_t question_id, int stage, const std::string& prompt) {
        nlohmann::ordered_json body;
        body["model"] = endpoint_.model;
        body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
        body["temperature"] = endpoint_.temperature;
        const std::string payload = body.dump();

        httplib::Client client(url_.origin);
        const auto timeout = std::chrono::duration<double>(endpoint_.timeout_seconds);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

        std::string last_error;
        for (int attempt = 1; attempt <= endpoint_.max_attempts; ++attempt) {
            limiter_.acquire();
            const double started = std::chrono::duration<double>(Clock::now() - start_).count();
            auto res = client.Post(url_.path, headers, payload, "application/json");
            const int status = res ? res->status : 0;
            log({question_id, stage, attempt, status, started});

            const bool retryable = !res || status == 429 || status >= 500;
            if (!retryable) {
                if (status < 200 || status >= 300) {
                    return {std::nullopt, "HTTP " + std::to_string(status)};
                }
                return parse_body(res->body);
            }
            last_error = res ? "HTTP " + std::to_string(status) : "transport error: " + httplib::to_string(res.error());
            if (attempt < endpoint_.max_attempts) {
                const double wait = endpoint_.backoff_base_seconds * std::pow(endpoint_.backoff_factor, attempt - 1);
                std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            }
        }
        return {std::nullopt, "retries exhausted after " + std::to_string(endpoint_.max_attempts) +
                                  " attempts (" + last_error + ")"};
    }

    std::vector<RequestAttempt> attempts() const {
        std::lock_guard lock(log_mutex_);
        return attempts_;
    }

private:
    static CallOutcome parse_body(const std::string& text) {
        try {
            const auto json = nlohmann::json::parse(text);
            const auto& content = json.at("choices").at(0).at("message").at("content");
            if (!content.is_string()) {
                return {std::nullopt, "malformed response: content is not a string"};
            }
            return {content.get<std::string>(), {}};
        } catch (const std::exception& e) {
            return {std::nullopt, std::string("malformed response: ") + e.what()};
        }
    }

    void log(const RequestAttempt& attempt) {
        std::lock_guard lock(log_mutex_);
        attempts_.push_back(attempt);
    }

    const RemoteEndpointConfig& endpoint_;
    ParsedUrl url_;
    std::string api_key_;
    RateLimiter limiter_;
    Clock::time_point start_;
    mutable std::mutex log_mutex_;
    std::vector<RequestAttempt> attempts_;
};

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

RemoteAnnotationResult annotate_remote(std::span<const QuestionRecord> records, const RemoteEndpointConfig& endpoint) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("remote teacher requires the " + endpoint.api_key_env + " environment variable");
    }
    if (endpoint.url.empty()) {
        throw ConfigError("remote teacher requires an endpoint url");
    }
    if (endpoint.max_attempts < 1 || endpoint.max_in_flight < 1) {
        throw ConfigError("remote teacher needs max_attempts >= 1 and max_in_flight >= 1");
    }

    RemoteSession session(endpoint, key);
    std::vector<std::optional<CoTAnnotation>> slots(records.size());
    std::vector<std::optional<RemoteFailure>> failures(records.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            const auto& record = records[i];
            const auto stage1 = session.complete(record.id, 1, first_stage_prompt(record.question));
            if (!stage1.content) {
                failures[i] = RemoteFailure{record.id, "stage 1: " + stage1.error};
                continue;
            }
            const std::string rationale = trim(*stage1.content);
            const auto stage2 = session.complete(record.id, 2, second_stage_prompt(record.question, rationale));
            if (!stage2.content) {
                failures[i] = RemoteFailure{record.id, "stage 2: " + stage2.error};
                continue;
            }
            const std::string answer_text = std::string(kVerboseMarker) + " " + trim(*stage2.content);
            CoTAnnotation ann;
            ann.question_id = record.id;
            ann.source = AnnotationSource::Teacher;
            ann.rationale = rationale.empty() ? answer_text : rationale + " " + answer_text;
            ann.prediction = extract_final_answer(record.task, answer_text);
            ann.correct = !ann.prediction.empty() && ann.prediction == record.gold_answer;
            slots[i] = std::move(ann);
        }
    };

    const auto pool_size = std::min<std::size_t>(static_cast<std::size_t>(endpoint.max_in_flight), records.size());
    std::vector<std::thread> pool;
    pool.reserve(pool_size);
    for (std::size_t t = 0; t < pool_size; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }

    RemoteAnnotationResult result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (slots[i]) {
            result.annotations.push_back(std::move(*slots[i]));
        }
        if (failures[i]) {
            result.failures.push_back(std::move(*failures[i]));
        }
    }
    std::stable_sort(result.annotations.begin(), result.annotations.end(),
                     [](const auto& a, const auto& b) { return a.question_id < b.question_id; });
    std::stable_sort(result.failures.begin(), result.failures.end(),
                     [](const auto& a, const auto& b) { return a.question_id < b.question_id; });
    result.attempts = session.attempts();
    std::stable_sort(result.attempts.begin(), result.attempts.end(), [](const auto& a, const auto& b) {
        return std::tie(a.question_id, a.stage, a.attempt) < std::tie(b.question_id, b.stage, b.attempt);
    });
    return result;
}

}  // namespace mentorkd
