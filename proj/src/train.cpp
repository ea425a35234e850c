#include "mentorkd/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "mentorkd/error.hpp"
#include "mentorkd/rng.hpp"

namespace mentorkd {

void TrainHyperparameters::validate() const {
    if (epochs < 0 || batch_size < 1) {
        throw ConfigError("epochs must be >= 0 and batch_size >= 1");
    }
    if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) {
        throw ConfigError("learning_rate and weight_decay must be non-negative");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
        throw ConfigError("warmup_fraction must be within [0, 1]");
    }
    if (max_steps < 0) {
        throw ConfigError("max_steps must be non-negative");
    }
}

double learning_rate_at(const TrainHyperparameters& hp, long step, long total_steps) {
    const long warm = static_cast<long>(std::ceil(hp.warmup_fraction * static_cast<double>(total_steps)));
    if (step < warm) {
        return hp.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warm);
    }
    const double span = static_cast<double>(std::max(1L, total_steps - warm));
    const double progress = std::min(1.0, static_cast<double>(step - warm) / span);
    return hp.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = static_cast<int>(i);
    }
    Rng rng(derive_seed(seed, {tag_of("epoch"), static_cast<std::uint64_t>(epoch)}));
    rng.shuffle(order);
    return order;
}

void adamw_step(TinyTransformer& model, TrainState& state, const TrainHyperparameters& hp, double lr) {
    auto& params = model.parameters();
    const double t = static_cast<double>(state.step + 1);
    const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(hp.beta1, t)));
    const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(hp.beta2, t)));
    const float b1 = static_cast<float>(hp.beta1);
    const float b2 = static_cast<float>(hp.beta2);
    const float eps = static_cast<float>(hp.adam_eps);
    const float step_lr = static_cast<float>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = state.adam_m[i];
        auto& v = state.adam_v[i];
        // matrices decay; biases, norms gains and offsets do not
        const float decay = p.rows > 1 ? static_cast<float>(hp.weight_decay) : 0.0F;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const float g = p.grad[j];
            m[j] = b1 * m[j] + (1.0F - b1) * g;
            v[j] = b2 * v[j] + (1.0F - b2) * g * g;
            const float update = (m[j] * c1) / (std::sqrt(v[j] * c2) + eps) + decay * p.value[j];
            p.value[j] -= step_lr * update;
        }
    }
}

// Softened mentor rows for a batch, aligned with SequenceBatch::rows.
std::vector<float> mentor_rows(const TinyTransformer& mentor, const SequenceBatch& batch, double temperature) {
    ag::Tape<float> tape(false);
    auto& m = const_cast<TinyTransformer&>(mentor);
    const auto logits = m.forward(tape, batch.ids, batch.batch, batch.seq, batch.rows);
    return soften_rows(tape.value(logits), static_cast<int>(batch.rows.size()), mentor.vocab_size(), temperature).probs;
}

}  // namespace

void train_loop(TinyTransformer& model, const DistillationSet& set, const TrainHyperparameters& hp,
                const Objective& objective, TrainState& state, const TrainOptions& options) {
    hp.validate();
    if (set.empty()) {
        throw DataError("cannot train on an empty set");
    }
    const double lam = effective_lambda(objective.ablation, objective.lambda);
    if (!(objective.lambda >= 0.0 && objective.lambda <= 1.0)) {
        throw ConfigError("lambda must be within [0, 1]");
    }
    if (!(objective.temperature > 0.0)) {
        throw ConfigError("temperature must be positive");
    }
    const TinyTransformer* mentor = objective.ablation == Ablation::NoSLD ? nullptr : objective.mentor;
    if (lam > 0.0 && mentor == nullptr) {
        throw ConfigError("soft-label distillation needs a mentor model");
    }
    if (mentor != nullptr && !(mentor->tokenizer() == model.tokenizer())) {
        throw ModelError("mentor and student tokenizers differ");
    }

    std::vector<EncodedExample> encoded;
    encoded.reserve(set.size());
    for (const auto& ex : set.examples) {
        encoded.push_back(encode_example(model.tokenizer(), ex));
        const int len = static_cast<int>(encoded.back().tokens.size()) - 1;
        if (len > model.config().max_sequence || (mentor != nullptr && len > mentor->config().max_sequence)) {
            throw DataError("example " + std::to_string(ex.question_id) + " needs " + std::to_string(len) +
                            " positions, above max_sequence");
        }
    }

    const int n = static_cast<int>(encoded.size());
    const int batches = (n + hp.batch_size - 1) / hp.batch_size;
    long total = static_cast<long>(hp.epochs) * batches;
    if (hp.max_steps > 0) {
        total = std::min(total, hp.max_steps);
    }

    auto& params = model.parameters();
    const bool fresh = state.adam_m.empty();
    if (fresh) {
        state = TrainState{};
        for (const auto& p : params) {
            state.adam_m.emplace_back(p.value.size(), 0.0F);
            state.adam_v.emplace_back(p.value.size(), 0.0F);
        }
        state.total_steps = total;
        state.dropout_rng = Rng(derive_seed(hp.seed, {tag_of("dropout")})).serialize();
    } else if (state.adam_m.size() != params.size() || state.total_steps != total) {
        throw ModelError("train state does not match this model / schedule");
    }
    Rng dropout_rng;
    dropout_rng.deserialize(state.dropout_rng);
    const bool use_dropout = model.config().dropout_rate > 0.0;

    // Mentor distributions depend only on each example's own tokens, so they
    // can be computed once up front when memory allows.
    std::vector<std::vector<float>> cached;
    if (mentor != nullptr) {
        std::size_t label_rows = 0;
        for (const auto& e : encoded) {
            label_rows += e.tokens.size() - 1 - static_cast<std::size_t>(e.sep_index);
        }
        if (label_rows * static_cast<std::size_t>(model.vocab_size()) * sizeof(float) <= options.soft_label_cache_bytes) {
            cached.resize(encoded.size());
            for (int b = 0; b < n; b += hp.batch_size) {
                std::vector<const EncodedExample*> members;
                for (int i = b; i < std::min(n, b + hp.batch_size); ++i) {
                    members.push_back(&encoded[static_cast<std::size_t>(i)]);
                }
                const auto batch = make_batch(members);
                const auto probs = mentor_rows(*mentor, batch, objective.temperature);
                std::size_t offset = 0;
                const std::size_t v = static_cast<std::size_t>(model.vocab_size());
                for (int i = b; i < std::min(n, b + hp.batch_size); ++i) {
                    const auto& e = encoded[static_cast<std::size_t>(i)];
                    const std::size_t rows = e.tokens.size() - 1 - static_cast<std::size_t>(e.sep_index);
                    cached[static_cast<std::size_t>(i)].assign(probs.begin() + static_cast<std::ptrdiff_t>(offset * v),
                                                               probs.begin() + static_cast<std::ptrdiff_t>((offset + rows) * v));
                    offset += rows;
                }
            }
        }
    }

    while (state.step < total) {
        const auto order = epoch_order(encoded.size(), hp.seed, state.epoch);
        for (; state.next_batch < batches && state.step < total; ++state.next_batch) {
            if (options.stop_at_step > 0 && state.step >= options.stop_at_step) {
                state.dropout_rng = dropout_rng.serialize();
                return;
            }
            const int lo = state.next_batch * hp.batch_size;
            const int hi = std::min(n, lo + hp.batch_size);
            std::vector<const EncodedExample*> members;
            for (int i = lo; i < hi; ++i) {
                members.push_back(&encoded[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            }
            const auto batch = make_batch(members);

            std::vector<float> reference;
            if (mentor != nullptr) {
                if (!cached.empty()) {
                    for (int i = lo; i < hi; ++i) {
                        const auto& c = cached[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
                        reference.insert(reference.end(), c.begin(), c.end());
                    }
                } else {
                    reference = mentor_rows(*mentor, batch, objective.temperature);
                }
            }

            model.zero_grad();
            ag::Tape<float> tape;
            const auto logits =
                model.forward(tape, batch.ids, batch.batch, batch.seq, batch.rows, use_dropout ? &dropout_rng : nullptr);
            const auto terms = joint_objective<float>(tape, logits, batch.targets, reference, objective.lambda,
                                                      objective.temperature, objective.ablation);
            tape.backward(terms.total);
            adamw_step(model, state, hp, learning_rate_at(hp, state.step, total));
            ++state.step;

            state.sum_rd += tape.scalar(terms.rd);
            state.sum_sld += terms.sld.valid() ? tape.scalar(terms.sld) : kNaN;
            state.sum_total += tape.scalar(terms.total);
            ++state.batches_in_epoch;
        }
        // epoch (or the truncated final epoch) finished
        EpochMetrics m;
        m.epoch = state.epoch + 1;
        const double k = static_cast<double>(std::max(1, state.batches_in_epoch));
        m.loss_rd = state.sum_rd / k;
        m.loss_sld = state.sum_sld / k;
        m.loss_total = state.sum_total / k;
        m.train_acc = kNaN;
        m.eval_acc = kNaN;
        if (options.monitor) {
            options.monitor(model, m);
        }
        state.history.push_back(m);
        ++state.epoch;
        state.next_batch = 0;
        state.sum_rd = state.sum_sld = state.sum_total = 0.0;
        state.batches_in_epoch = 0;
    }
    state.dropout_rng = dropout_rng.serialize();
}

TrainResult train_lm(TinyTransformer& model, const DistillationSet& set, const TrainHyperparameters& hp,
                     const TrainOptions& options) {
    TrainResult result;
    train_loop(model, set, hp, Objective{}, result.state, options);
    result.curve = result.state.history;
    return result;
}

void write_metrics_csv(const std::vector<EpochMetrics>& curve, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "epoch,loss_rd,loss_sld,loss_total,train_acc,eval_acc\n";
    out.precision(9);
    for (const auto& m : curve) {
        out << m.epoch << ',' << m.loss_rd << ',' << m.loss_sld << ',' << m.loss_total << ',' << m.train_acc << ','
            << m.eval_acc << '\n';
    }
}

}  // namespace mentorkd
