#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mentorkd/dataset.hpp"
#include "mentorkd/model.hpp"
#include "mentorkd/train.hpp"

namespace mentorkd {

struct DistillHyperparameters {
    double lambda = 0.3;
    double temperature = 2.0;
    int augmentation_degree = 3;
    Ablation ablation = Ablation::Full;
    TrainHyperparameters train;

    void validate() const;
};

// Fine-tunes the mentor on D_teacher with the rationale loss only.
TrainResult train_mentor(TinyTransformer& mentor, const DistillationSet& teacher_set, const TrainHyperparameters& hp,
                         const TrainOptions& options = {});

struct AugmentOptions {
    double sampling_temperature = 0.7;  // used when degree > 1; degree 1 decodes greedily
    int max_new_tokens = 128;
    LabelTemplate label_template = LabelTemplate::Compact;
};

// Raw mentor annotations: `degree` generations per record, in record order.
std::vector<CoTAnnotation> mentor_annotations(const TinyTransformer& mentor, std::span<const QuestionRecord> records,
                                              int degree, std::uint64_t seed, const AugmentOptions& options = {});

// D_mentor: mentor annotations filtered against the gold answers and reformatted.
DistillationSet augment_with_mentor(const TinyTransformer& mentor, std::span<const QuestionRecord> records, int degree,
                                    std::uint64_t seed, const AugmentOptions& options = {});

// Joint rationale + soft-label training; the mentor is read-only.
TrainResult train_student(TinyTransformer& student, const TinyTransformer* mentor, const DistillationSet& train_set,
                          const DistillHyperparameters& hp, const TrainOptions& options = {});

}  // namespace mentorkd
