#include "mentorkd/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mentorkd/error.hpp"
#include "mentorkd/kernels.hpp"

namespace mentorkd {

std::string to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::Full:
            return "full";
        case Ablation::NoRD:
            return "no-rd";
        case Ablation::NoSLD:
            return "no-sld";
    }
    return "full";
}

Ablation parse_ablation(std::string_view name) {
    if (name == "full") return Ablation::Full;
    if (name == "no-rd") return Ablation::NoRD;
    if (name == "no-sld") return Ablation::NoSLD;
    throw ConfigError("unknown ablation '" + std::string(name) + "' (expected full, no-rd, no-sld)");
}

double effective_lambda(Ablation ablation, double lambda) {
    switch (ablation) {
        case Ablation::NoSLD:
            return 0.0;
        case Ablation::NoRD:
            return 1.0;
        case Ablation::Full:
            break;
    }
    return lambda;
}

double rationale_loss(std::span<const double> logits, int vocab, std::span<const int> targets,
                      std::span<const bool> mask) {
    const std::size_t rows = targets.size();
    if (logits.size() != rows * static_cast<std::size_t>(vocab) || mask.size() != rows) {
        throw ModelError("rationale_loss: logits, targets and mask are not aligned");
    }
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask[r]) {
            continue;
        }
        const auto row = logits.subspan(r * vocab, static_cast<std::size_t>(vocab));
        const double peak = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (const double z : row) {
            acc += std::exp(z - peak);
        }
        total += std::log(acc) + peak - row[static_cast<std::size_t>(targets[r])];
        ++counted;
    }
    if (counted == 0) {
        throw ModelError("rationale_loss: every position is masked");
    }
    return total / static_cast<double>(counted);
}

std::vector<double> soften(std::span<const double> logits, double temperature) {
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive, got " + std::to_string(temperature));
    }
    std::vector<double> out(logits.size());
    if (logits.empty()) {
        return out;
    }
    kernels::serial::softmax_rows(logits.data(), out.data(), 1, static_cast<int>(logits.size()), temperature);
    return out;
}

double soft_label_loss(std::span<const double> mentor_probs, std::span<const double> student_probs, int vocab) {
    if (mentor_probs.size() != student_probs.size() || vocab < 1 || mentor_probs.size() % vocab != 0) {
        throw ModelError("soft_label_loss: shape mismatch between mentor and student distributions");
    }
    const std::size_t rows = mentor_probs.size() / vocab;
    if (rows == 0) {
        throw ModelError("soft_label_loss: no positions");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < mentor_probs.size(); ++i) {
        const double p = mentor_probs[i];
        if (p > 0.0) {
            total += p * (std::log(std::max(p, kProbabilityFloor)) -
                          std::log(std::max(student_probs[i], kProbabilityFloor)));
        }
    }
    return total / static_cast<double>(rows);
}

double joint_loss(double l_rd, double l_sld, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must be within [0, 1]");
    }
    return (1.0 - lambda) * l_rd + lambda * l_sld;
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (const double p : probs) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

SoftLabelBatch soften_rows(std::span<const float> logits, int rows, int vocab, double temperature) {
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive");
    }
    if (logits.size() != static_cast<std::size_t>(rows) * vocab) {
        throw ModelError("soften_rows: shape mismatch");
    }
    SoftLabelBatch out{rows, vocab, temperature, std::vector<float>(logits.size())};
    kernels::softmax_rows(logits.data(), out.probs.data(), rows, vocab, static_cast<float>(temperature));
    return out;
}

template <class T>
JointTerms<T> joint_objective(ag::Tape<T>& tape, ag::Var student_logits, std::span<const int> targets,
                              std::span<const T> reference, double lambda, double temperature, Ablation ablation) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda must be within [0, 1]");
    }
    const double lam = effective_lambda(ablation, lambda);
    JointTerms<T> terms;
    terms.rd = ag::cross_entropy(tape, student_logits, targets);
    if (!reference.empty()) {
        terms.sld = ag::soft_label_kl(tape, student_logits, reference, static_cast<T>(temperature),
                                      static_cast<T>(kProbabilityFloor));
    } else if (lam > 0.0) {
        throw ModelError("soft-label loss requested without mentor distributions");
    }
    if (lam == 0.0) {
        terms.total = terms.rd;
    } else if (lam == 1.0) {
        terms.total = terms.sld;
    } else {
        terms.total = ag::add(tape, ag::scale(tape, terms.rd, static_cast<T>(1.0 - lam)),
                              ag::scale(tape, terms.sld, static_cast<T>(lam)));
    }
    return terms;
}

template JointTerms<float> joint_objective<float>(ag::Tape<float>&, ag::Var, std::span<const int>,
                                                  std::span<const float>, double, double, Ablation);
template JointTerms<double> joint_objective<double>(ag::Tape<double>&, ag::Var, std::span<const int>,
                                                    std::span<const double>, double, double, Ablation);

}  // namespace mentorkd
