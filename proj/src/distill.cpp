#include "mentorkd/distill.hpp"

#include "mentorkd/error.hpp"
#include "mentorkd/rng.hpp"

namespace mentorkd {

void DistillHyperparameters::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must be within [0, 1], got " + std::to_string(lambda));
    }
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive, got " + std::to_string(temperature));
    }
    if (augmentation_degree < 0) {
        throw ConfigError("augmentation degree must be non-negative");
    }
    train.validate();
}

TrainResult train_mentor(TinyTransformer& mentor, const DistillationSet& teacher_set, const TrainHyperparameters& hp,
                         const TrainOptions& options) {
    if (teacher_set.provenance != Provenance::TeacherOnly) {
        throw DataError("mentor training expects a teacher-only set, got " + to_string(teacher_set.provenance));
    }
    return train_lm(mentor, teacher_set, hp, options);
}

std::vector<CoTAnnotation> mentor_annotations(const TinyTransformer& mentor, std::span<const QuestionRecord> records,
                                              int degree, std::uint64_t seed, const AugmentOptions& options) {
    if (degree < 1) {
        throw ConfigError("augmentation degree must be at least 1");
    }
    std::vector<std::string> prompts;
    std::vector<std::uint64_t> seeds;
    prompts.reserve(records.size() * static_cast<std::size_t>(degree));
    for (const auto& r : records) {
        for (int s = 0; s < degree; ++s) {
            prompts.push_back(r.question);
            seeds.push_back(derive_seed(seed, {static_cast<std::uint64_t>(r.id), static_cast<std::uint64_t>(s)}));
        }
    }
    const double temperature = degree == 1 ? 0.0 : options.sampling_temperature;
    const auto outputs = generate_batch(mentor, prompts, options.max_new_tokens, temperature, seeds);

    std::vector<CoTAnnotation> out;
    out.reserve(outputs.size());
    std::size_t i = 0;
    for (const auto& r : records) {
        for (int s = 0; s < degree; ++s, ++i) {
            CoTAnnotation ann;
            ann.question_id = r.id;
            ann.rationale = outputs[i];
            ann.prediction = extract_final_answer(r.task, outputs[i]);
            ann.source = AnnotationSource::Mentor;
            ann.correct = !ann.prediction.empty() && ann.prediction == r.gold_answer;
            out.push_back(std::move(ann));
        }
    }
    return out;
}

DistillationSet augment_with_mentor(const TinyTransformer& mentor, std::span<const QuestionRecord> records, int degree,
                                    std::uint64_t seed, const AugmentOptions& options) {
    const auto annotations = mentor_annotations(mentor, records, degree, seed, options);
    const auto kept = filter_annotations(annotations, records);
    auto set = reformat(kept, records, options.label_template);
    set.provenance = Provenance::MentorOnly;
    return set;
}

TrainResult train_student(TinyTransformer& student, const TinyTransformer* mentor, const DistillationSet& train_set,
                          const DistillHyperparameters& hp, const TrainOptions& options) {
    hp.validate();
    if (hp.ablation != Ablation::NoSLD && mentor == nullptr) {
        throw ConfigError("ablation " + to_string(hp.ablation) + " needs a mentor for soft labels");
    }
    if (mentor != nullptr && !(mentor->tokenizer() == student.tokenizer())) {
        throw ModelError("mentor and student tokenizers differ");
    }
    Objective objective{mentor, hp.lambda, hp.temperature, hp.ablation};
    TrainResult result;
    train_loop(student, train_set, hp.train, objective, result.state, options);
    result.curve = result.state.history;
    return result;
}

}  // namespace mentorkd
