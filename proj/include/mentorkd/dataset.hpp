#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mentorkd/tasks.hpp"
#include "mentorkd/teacher.hpp"

namespace mentorkd {

struct TrainingExample {
    std::int64_t question_id = 0;
    std::string question;
    std::string label;
    std::string gold_answer;
    AnnotationSource source = AnnotationSource::Teacher;

    bool operator==(const TrainingExample&) const = default;
};

enum class Provenance { TeacherOnly, MentorOnly, Union };

std::string to_string(Provenance provenance);

struct DistillationSet {
    std::vector<TrainingExample> examples;
    Provenance provenance = Provenance::TeacherOnly;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
    bool operator==(const DistillationSet&) const = default;
};

enum class LabelTemplate { Verbose, Compact };

std::string to_string(LabelTemplate label_template);
LabelTemplate parse_label_template(std::string_view name);

// "{r}. Therefore, the answer is {y}." or "{r}. --> {y}."
std::string render_label(LabelTemplate label_template, std::string_view rationale, std::string_view answer);

// Removes everything from the last answer marker on, then trailing whitespace and periods.
std::string strip_final_answer_sentence(std::string_view rationale);

// Keeps annotations with correct == true, in order. Throws DataError naming the
// id of any annotation whose question is missing from `records`.
std::vector<CoTAnnotation> filter_annotations(std::span<const CoTAnnotation> annotations,
                                              std::span<const QuestionRecord> records);

DistillationSet reformat(std::span<const CoTAnnotation> kept, std::span<const QuestionRecord> records,
                         LabelTemplate label_template);

// Multiset concatenation; teacher examples first.
DistillationSet union_sets(const DistillationSet& teacher_set, const DistillationSet& mentor_set);

// At most k examples per question id, chosen uniformly without replacement.
// Relative order of the kept examples is preserved.
DistillationSet sample_per_question(const DistillationSet& set, int k, std::uint64_t seed);

// Keeps ceil(fraction * Q) whole questions out of the Q distinct ids.
DistillationSet subsample_fraction(const DistillationSet& set, double fraction, std::uint64_t seed);

std::vector<std::int64_t> question_ids(const DistillationSet& set);  // distinct, first-seen order

// ---- JSONL persistence ----
// Fields, in order: question_id, question, label, gold_answer, source.
void save_jsonl(const DistillationSet& set, const std::filesystem::path& path);
DistillationSet load_jsonl(const std::filesystem::path& path);

void save_instances_jsonl(std::span<const TaskInstance> instances, const std::filesystem::path& path);
// Accepts records without rationale fields (generic import); steps are then empty.
std::vector<TaskInstance> load_instances_jsonl(const std::filesystem::path& path);

void save_annotations_jsonl(std::span<const CoTAnnotation> annotations, const std::filesystem::path& path);
std::vector<CoTAnnotation> load_annotations_jsonl(const std::filesystem::path& path);

std::vector<QuestionRecord> records_of(std::span<const TaskInstance> instances);

}  // namespace mentorkd
