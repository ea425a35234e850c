#pragma once

#include <span>
#include <string>
#include <vector>

#include "mentorkd/autodiff.hpp"

namespace mentorkd {

enum class Ablation { Full, NoRD, NoSLD };

std::string to_string(Ablation ablation);
Ablation parse_ablation(std::string_view name);

// Effective interpolation weight: NoSLD forces 0, NoRD forces 1.
double effective_lambda(Ablation ablation, double lambda);

inline constexpr double kProbabilityFloor = 1e-8;

// ---- plain-number versions (used by tests and reports) ----

// logits: [rows, vocab]; mean of -log softmax(row)[target] over rows where mask is true.
// Throws ModelError when every row is masked.
double rationale_loss(std::span<const double> logits, int vocab, std::span<const int> targets,
                      std::span<const bool> mask);

// exp(z/tau) / sum exp(z/tau), with the max subtracted first. tau <= 0 is a ConfigError.
std::vector<double> soften(std::span<const double> logits, double temperature);

// Mean over rows of sum_k p_k ln(p_k / q_k), probabilities floored at 1e-8 and 0 ln 0 = 0.
double soft_label_loss(std::span<const double> mentor_probs, std::span<const double> student_probs, int vocab);

double joint_loss(double l_rd, double l_sld, double lambda);

double entropy(std::span<const double> probs);

// Per-position probability rows at temperature tau for a set of label positions.
struct SoftLabelBatch {
    int rows = 0;
    int vocab = 0;
    double temperature = 1.0;
    std::vector<float> probs;
};

SoftLabelBatch soften_rows(std::span<const float> logits, int rows, int vocab, double temperature);

// ---- differentiable objective ----

template <class T>
struct JointTerms {
    ag::Var rd;     // always computed
    ag::Var sld;    // invalid when no reference distribution is supplied
    ag::Var total;  // what backward() should be called on
};

// reference: softened mentor rows aligned with the student's logit rows, or
// empty (rationale loss only; lambda must then resolve to 0).
template <class T>
JointTerms<T> joint_objective(ag::Tape<T>& tape, ag::Var student_logits, std::span<const int> targets,
                              std::span<const T> reference, double lambda, double temperature, Ablation ablation);

}  // namespace mentorkd
