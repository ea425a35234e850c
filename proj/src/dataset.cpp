#include "mentorkd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mentorkd/error.hpp"
#include "mentorkd/rng.hpp"

namespace mentorkd {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Provenance provenance) {
    switch (provenance) {
        case Provenance::TeacherOnly:
            return "teacher_only";
        case Provenance::MentorOnly:
            return "mentor_only";
        case Provenance::Union:
            return "union";
    }
    return "unknown";
}

std::string to_string(LabelTemplate label_template) {
    return label_template == LabelTemplate::Verbose ? "verbose" : "compact";
}

LabelTemplate parse_label_template(std::string_view name) {
    if (name == "verbose") {
        return LabelTemplate::Verbose;
    }
    if (name == "compact") {
        return LabelTemplate::Compact;
    }
    throw ConfigError("unknown label template '" + std::string(name) + "' (expected verbose or compact)");
}

std::string render_label(LabelTemplate label_template, std::string_view rationale, std::string_view answer) {
    std::string out(rationale);
    out += label_template == LabelTemplate::Verbose ? ". Therefore, the answer is " : ". --> ";
    out += answer;
    out += '.';
    return out;
}

std::string strip_final_answer_sentence(std::string_view rationale) {
    const auto verbose = rationale.rfind(kVerboseMarker);
    const auto compact = rationale.rfind(kCompactMarker);
    std::size_t cut = std::string_view::npos;
    if (verbose != std::string_view::npos) {
        cut = verbose;
    }
    if (compact != std::string_view::npos && (cut == std::string_view::npos || compact > cut)) {
        cut = compact;
    }
    std::string_view kept = rationale.substr(0, cut);
    while (!kept.empty() && (kept.back() == '.' || kept.back() == ' ' || kept.back() == '\n' || kept.back() == '\t')) {
        kept.remove_suffix(1);
    }
    return std::string(kept);
}

namespace {

std::unordered_map<std::int64_t, const QuestionRecord*> index_records(std::span<const QuestionRecord> records) {
    std::unordered_map<std::int64_t, const QuestionRecord*> index;
    index.reserve(records.size());
    for (const auto& r : records) {
        index.emplace(r.id, &r);
    }
    return index;
}

}  // namespace

std::vector<CoTAnnotation> filter_annotations(std::span<const CoTAnnotation> annotations,
                                              std::span<const QuestionRecord> records) {
    const auto index = index_records(records);
    std::vector<CoTAnnotation> kept;
    for (const auto& ann : annotations) {
        if (!index.contains(ann.question_id)) {
            throw DataError("annotation references unknown question id " + std::to_string(ann.question_id));
        }
        if (ann.correct) {
            kept.push_back(ann);
        }
    }
    return kept;
}

DistillationSet reformat(std::span<const CoTAnnotation> kept, std::span<const QuestionRecord> records,
                         LabelTemplate label_template) {
    const auto index = index_records(records);
    DistillationSet set;
    bool any_teacher = false;
    bool any_mentor = false;
    set.examples.reserve(kept.size());
    for (const auto& ann : kept) {
        const auto it = index.find(ann.question_id);
        if (it == index.end()) {
            throw DataError("annotation references unknown question id " + std::to_string(ann.question_id));
        }
        if (!ann.correct) {
            throw DataError("reformat expects filtered annotations; question " + std::to_string(ann.question_id) +
                            " has an incorrect prediction");
        }
        const auto& record = *it->second;
        TrainingExample ex;
        ex.question_id = record.id;
        ex.question = record.question;
        ex.gold_answer = record.gold_answer;
        ex.source = ann.source;
        ex.label = render_label(label_template, strip_final_answer_sentence(ann.rationale),
                                display_answer(record.task, record.gold_answer));
        any_teacher |= ann.source == AnnotationSource::Teacher;
        any_mentor |= ann.source == AnnotationSource::Mentor;
        set.examples.push_back(std::move(ex));
    }
    set.provenance = any_teacher && any_mentor ? Provenance::Union
                     : any_mentor              ? Provenance::MentorOnly
                                               : Provenance::TeacherOnly;
    return set;
}

DistillationSet union_sets(const DistillationSet& teacher_set, const DistillationSet& mentor_set) {
    DistillationSet out;
    out.provenance = Provenance::Union;
    out.examples.reserve(teacher_set.size() + mentor_set.size());
    out.examples.insert(out.examples.end(), teacher_set.examples.begin(), teacher_set.examples.end());
    out.examples.insert(out.examples.end(), mentor_set.examples.begin(), mentor_set.examples.end());
    return out;
}

std::vector<std::int64_t> question_ids(const DistillationSet& set) {
    std::vector<std::int64_t> ids;
    std::unordered_set<std::int64_t> seen;
    for (const auto& ex : set.examples) {
        if (seen.insert(ex.question_id).second) {
            ids.push_back(ex.question_id);
        }
    }
    return ids;
}

DistillationSet sample_per_question(const DistillationSet& set, int k, std::uint64_t seed) {
    if (k < 1) {
        throw ConfigError("sample_per_question: k must be at least 1");
    }
    std::map<std::int64_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < set.examples.size(); ++i) {
        groups[set.examples[i].question_id].push_back(i);
    }
    std::vector<bool> keep(set.examples.size(), false);
    for (const auto& [id, members] : groups) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(id)}));
        for (const auto pick : rng.sample_indices(members.size(), static_cast<std::size_t>(k))) {
            keep[members[pick]] = true;
        }
    }
    DistillationSet out;
    out.provenance = set.provenance;
    for (std::size_t i = 0; i < set.examples.size(); ++i) {
        if (keep[i]) {
            out.examples.push_back(set.examples[i]);
        }
    }
    return out;
}

DistillationSet subsample_fraction(const DistillationSet& set, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("subsample_fraction: fraction must be within (0, 1]");
    }
    if (fraction == 1.0) {
        return set;
    }
    auto ids = question_ids(set);
    std::sort(ids.begin(), ids.end());
    const auto keep_count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9));
    Rng rng(derive_seed(seed, {tag_of("subsample_fraction")}));
    std::unordered_set<std::int64_t> kept_ids;
    for (const auto pick : rng.sample_indices(ids.size(), keep_count)) {
        kept_ids.insert(ids[pick]);
    }
    DistillationSet out;
    out.provenance = set.provenance;
    for (const auto& ex : set.examples) {
        if (kept_ids.contains(ex.question_id)) {
            out.examples.push_back(ex);
        }
    }
    return out;
}

std::vector<QuestionRecord> records_of(std::span<const TaskInstance> instances) {
    std::vector<QuestionRecord> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        out.push_back(inst.record);
    }
    return out;
}

// ---- JSONL ----

namespace {

template <class Fn>
void read_lines(const std::filesystem::path& path, Fn&& on_line) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        try {
            on_line(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        } catch (const std::exception& e) {
            throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    return out;
}

template <class T>
T required(const nlohmann::json& obj, const char* field) {
    if (!obj.is_object()) {
        throw DataError("expected a JSON object");
    }
    const auto it = obj.find(field);
    if (it == obj.end()) {
        throw DataError(std::string("missing field '") + field + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw DataError(std::string("field '") + field + "' has the wrong type");
    }
}

}  // namespace

void save_jsonl(const DistillationSet& set, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& ex : set.examples) {
        ordered_json j;
        j["question_id"] = ex.question_id;
        j["question"] = ex.question;
        j["label"] = ex.label;
        j["gold_answer"] = ex.gold_answer;
        j["source"] = to_string(ex.source);
        out << j.dump() << '\n';
    }
}

DistillationSet load_jsonl(const std::filesystem::path& path) {
    DistillationSet set;
    bool any_teacher = false;
    bool any_mentor = false;
    read_lines(path, [&](const nlohmann::json& j) {
        TrainingExample ex;
        ex.question_id = required<std::int64_t>(j, "question_id");
        ex.question = required<std::string>(j, "question");
        ex.label = required<std::string>(j, "label");
        ex.gold_answer = required<std::string>(j, "gold_answer");
        ex.source = parse_annotation_source(required<std::string>(j, "source"));
        any_teacher |= ex.source == AnnotationSource::Teacher;
        any_mentor |= ex.source == AnnotationSource::Mentor;
        set.examples.push_back(std::move(ex));
    });
    set.provenance = any_teacher && any_mentor ? Provenance::Union
                     : any_mentor              ? Provenance::MentorOnly
                                               : Provenance::TeacherOnly;
    return set;
}

void save_instances_jsonl(std::span<const TaskInstance> instances, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& inst : instances) {
        ordered_json j;
        j["id"] = inst.record.id;
        j["question"] = inst.record.question;
        j["gold_answer"] = inst.record.gold_answer;
        j["task"] = to_string(inst.record.task);
        j["rationale_steps"] = inst.rationale.steps;
        j["partial_answers"] = inst.rationale.partial_answers;
        out << j.dump() << '\n';
    }
}

std::vector<TaskInstance> load_instances_jsonl(const std::filesystem::path& path) {
    std::vector<TaskInstance> out;
    std::unordered_set<std::int64_t> ids;
    read_lines(path, [&](const nlohmann::json& j) {
        TaskInstance inst;
        inst.record.id = required<std::int64_t>(j, "id");
        inst.record.question = required<std::string>(j, "question");
        inst.record.task = parse_task_kind(required<std::string>(j, "task"));
        inst.record.gold_answer = normalize_answer(inst.record.task, required<std::string>(j, "gold_answer"));
        if (j.contains("rationale_steps")) {
            inst.rationale.steps = required<std::vector<std::string>>(j, "rationale_steps");
        }
        if (j.contains("partial_answers")) {
            inst.rationale.partial_answers = required<std::vector<std::string>>(j, "partial_answers");
        }
        inst.rationale.final_answer = inst.record.gold_answer;
        if (!ids.insert(inst.record.id).second) {
            throw DataError("duplicate record id " + std::to_string(inst.record.id));
        }
        out.push_back(std::move(inst));
    });
    return out;
}

void save_annotations_jsonl(std::span<const CoTAnnotation> annotations, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& ann : annotations) {
        ordered_json j;
        j["question_id"] = ann.question_id;
        j["rationale"] = ann.rationale;
        j["prediction"] = ann.prediction;
        j["source"] = to_string(ann.source);
        j["correct"] = ann.correct;
        out << j.dump() << '\n';
    }
}

std::vector<CoTAnnotation> load_annotations_jsonl(const std::filesystem::path& path) {
    std::vector<CoTAnnotation> out;
    read_lines(path, [&](const nlohmann::json& j) {
        CoTAnnotation ann;
        ann.question_id = required<std::int64_t>(j, "question_id");
        ann.rationale = required<std::string>(j, "rationale");
        ann.prediction = required<std::string>(j, "prediction");
        ann.source = parse_annotation_source(required<std::string>(j, "source"));
        ann.correct = required<bool>(j, "correct");
        out.push_back(std::move(ann));
    });
    return out;
}

}  // namespace mentorkd
