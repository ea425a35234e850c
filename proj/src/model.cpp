#include "mentorkd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <omp.h>

#include "mentorkd/error.hpp"
#include "mentorkd/kernels.hpp"
#include "mentorkd/rng.hpp"

namespace mentorkd {

void ModelConfig::validate() const {
    if (layers < 0 || model_dim < 1 || heads < 1 || feedforward_dim < 1 || max_sequence < 2) {
        throw ConfigError("model config: layers >= 0, dims >= 1 and max_sequence >= 2 required");
    }
    if (model_dim % heads != 0) {
        throw ConfigError("model config: model_dim " + std::to_string(model_dim) + " is not divisible by heads " +
                          std::to_string(heads));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("model config: dropout_rate must be within [0, 1)");
    }
}

ModelConfig ModelConfig::preset(std::string_view name) {
    auto make = [](int l, int d, int h) { return ModelConfig{l, d, h, 4 * d, 512, 0.0}; };
    if (name == "micro") return make(1, 32, 2);
    if (name == "student") return make(2, 64, 2);
    if (name == "mentor") return make(4, 128, 4);
    if (name == "large-mentor") return make(6, 192, 6);
    throw ConfigError("unknown model preset '" + std::string(name) + "' (expected micro, student, mentor, large-mentor)");
}

std::vector<std::string> preset_names() { return {"micro", "student", "mentor", "large-mentor"}; }

std::string to_string(ModelRole role) { return role == ModelRole::Mentor ? "mentor" : "student"; }

ModelRole parse_model_role(std::string_view name) {
    if (name == "mentor") return ModelRole::Mentor;
    if (name == "student") return ModelRole::Student;
    throw ConfigError("unknown model role '" + std::string(name) + "'");
}

template <class T>
BasicTransformer<T>::BasicTransformer(const ModelConfig& config, Tokenizer tokenizer, ModelRole role,
                                      std::uint64_t seed)
    : config_(config), tokenizer_(std::move(tokenizer)), role_(role) {
    config_.validate();
    const int d = config_.model_dim;
    const int v = tokenizer_.vocab_size();
    Rng rng(seed);
    auto add = [&](std::string name, int rows, int cols, char init) {
        Parameter<T> p{std::move(name), rows, cols, std::vector<T>(static_cast<std::size_t>(rows) * cols), {}};
        for (auto& x : p.value) {
            x = init == 'n' ? static_cast<T>(0.02 * rng.normal()) : init == '1' ? T(1) : T(0);
        }
        params_.push_back(std::move(p));
    };
    add("tok_emb", v, d, 'n');
    add("pos_emb", config_.max_sequence, d, 'n');
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        add(p + "ln1.g", 1, d, '1');
        add(p + "ln1.b", 1, d, '0');
        add(p + "attn.qkv.w", d, 3 * d, 'n');
        add(p + "attn.qkv.b", 1, 3 * d, '0');
        add(p + "attn.out.w", d, d, 'n');
        add(p + "attn.out.b", 1, d, '0');
        add(p + "ln2.g", 1, d, '1');
        add(p + "ln2.b", 1, d, '0');
        add(p + "mlp.fc.w", d, config_.feedforward_dim, 'n');
        add(p + "mlp.fc.b", 1, config_.feedforward_dim, '0');
        add(p + "mlp.proj.w", config_.feedforward_dim, d, 'n');
        add(p + "mlp.proj.b", 1, d, '0');
    }
    add("lnf.g", 1, d, '1');
    add("lnf.b", 1, d, '0');
    add("head.w", d, v, 'n');
    add("head.b", 1, v, '0');
    index_parameters();
}

template <class T>
BasicTransformer<T> BasicTransformer<T>::from_parameters(const ModelConfig& config, Tokenizer tokenizer,
                                                         ModelRole role, std::vector<Parameter<T>> params) {
    BasicTransformer shape(config, tokenizer, role, 0);
    if (params.size() != shape.params_.size()) {
        throw ModelError("parameter list does not match the model config");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& want = shape.params_[i];
        if (params[i].name != want.name || params[i].rows != want.rows || params[i].cols != want.cols ||
            params[i].value.size() != want.value.size()) {
            throw ModelError("parameter '" + params[i].name + "' does not match the model config");
        }
    }
    shape.params_ = std::move(params);
    shape.index_parameters();
    return shape;
}

template <class T>
void BasicTransformer<T>::index_parameters() {
    auto find = [this](const std::string& name) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].name == name) {
                return static_cast<int>(i);
            }
        }
        throw ModelError("missing parameter " + name);
    };
    layout_.tok = find("tok_emb");
    layout_.pos = find("pos_emb");
    layout_.layers.clear();
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        layout_.layers.push_back({find(p + "ln1.g"), find(p + "ln1.b"), find(p + "attn.qkv.w"), find(p + "attn.qkv.b"),
                                  find(p + "attn.out.w"), find(p + "attn.out.b"), find(p + "ln2.g"), find(p + "ln2.b"),
                                  find(p + "mlp.fc.w"), find(p + "mlp.fc.b"), find(p + "mlp.proj.w"),
                                  find(p + "mlp.proj.b")});
    }
    layout_.lnf_g = find("lnf.g");
    layout_.lnf_b = find("lnf.b");
    layout_.head_w = find("head.w");
    layout_.head_b = find("head.b");
}

template <class T>
Parameter<T>& BasicTransformer<T>::parameter(std::string_view name) {
    for (auto& p : params_) {
        if (p.name == name) {
            return p;
        }
    }
    throw ModelError("no parameter named " + std::string(name));
}

template <class T>
std::size_t BasicTransformer<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.value.size();
    }
    return n;
}

template <class T>
std::size_t BasicTransformer<T>::parameter_count(const ModelConfig& c, int vocab) {
    const std::size_t d = static_cast<std::size_t>(c.model_dim);
    const std::size_t f = static_cast<std::size_t>(c.feedforward_dim);
    const std::size_t v = static_cast<std::size_t>(vocab);
    const std::size_t per_layer = 4 * d + (d * 3 * d + 3 * d) + (d * d + d) + (d * f + f) + (f * d + d);
    return v * d + static_cast<std::size_t>(c.max_sequence) * d + c.layers * per_layer + 2 * d + d * v + v;
}

template <class T>
void BasicTransformer<T>::zero_grad() {
    for (auto& p : params_) {
        p.grad.assign(p.value.size(), T(0));
    }
}

template <class T>
ag::Var BasicTransformer<T>::forward(ag::Tape<T>& tape, std::span<const int> ids, int batch, int seq,
                                     std::span<const int> rows, Rng* dropout_rng) {
    if (seq > config_.max_sequence) {
        throw ModelError("sequence length " + std::to_string(seq) + " exceeds max_sequence " +
                         std::to_string(config_.max_sequence));
    }
    auto P = [&](int index) { return tape.leaf(params_[static_cast<std::size_t>(index)]); };
    const T rate = static_cast<T>(config_.dropout_rate);
    auto drop = [&](ag::Var v) { return dropout_rng != nullptr ? ag::dropout(tape, v, rate, *dropout_rng) : v; };

    ag::Var x = drop(ag::embed(tape, P(layout_.tok), P(layout_.pos), ids, batch, seq));
    for (const auto& L : layout_.layers) {
        ag::Var h = ag::layernorm(tape, x, P(L.ln1_g), P(L.ln1_b));
        h = ag::linear(tape, h, P(L.qkv_w), P(L.qkv_b));
        h = ag::causal_attention(tape, h, batch, seq, config_.heads);
        h = drop(ag::linear(tape, h, P(L.out_w), P(L.out_b)));
        x = ag::add(tape, x, h);
        h = ag::layernorm(tape, x, P(L.ln2_g), P(L.ln2_b));
        h = ag::gelu(tape, ag::linear(tape, h, P(L.fc_w), P(L.fc_b)));
        h = drop(ag::linear(tape, h, P(L.proj_w), P(L.proj_b)));
        x = ag::add(tape, x, h);
    }
    if (!rows.empty()) {
        x = ag::gather_rows(tape, x, rows);
    }
    x = ag::layernorm(tape, x, P(layout_.lnf_g), P(layout_.lnf_b));
    return ag::linear(tape, x, P(layout_.head_w), P(layout_.head_b));
}

template <class T>
std::vector<T> BasicTransformer<T>::logits(std::span<const int> ids, int batch, int seq) const {
    ag::Tape<T> tape(false);
    auto& self = const_cast<BasicTransformer&>(*this);  // leaves are read-only when not recording
    const auto out = self.forward(tape, ids, batch, seq);
    const auto v = tape.value(out);
    return {v.begin(), v.end()};
}

EncodedExample encode_example(const Tokenizer& tokenizer, const TrainingExample& example) {
    EncodedExample out;
    try {
        const auto q = tokenizer.encode(example.question);
        const auto l = tokenizer.encode(example.label);
        out.tokens.reserve(q.size() + l.size() + 3);
        out.tokens.push_back(Tokenizer::kBos);
        out.tokens.insert(out.tokens.end(), q.begin(), q.end());
        out.sep_index = static_cast<int>(out.tokens.size());
        out.tokens.push_back(Tokenizer::kSep);
        out.tokens.insert(out.tokens.end(), l.begin(), l.end());
        out.tokens.push_back(Tokenizer::kEos);
    } catch (const DataError& e) {
        throw DataError("example " + std::to_string(example.question_id) + ": " + e.what());
    }
    return out;
}

SequenceBatch make_batch(std::span<const EncodedExample* const> examples) {
    SequenceBatch b;
    b.batch = static_cast<int>(examples.size());
    for (const auto* ex : examples) {
        b.seq = std::max(b.seq, static_cast<int>(ex->tokens.size()) - 1);
    }
    b.ids.assign(static_cast<std::size_t>(b.batch) * b.seq, Tokenizer::kPad);
    for (int i = 0; i < b.batch; ++i) {
        const auto& tokens = examples[static_cast<std::size_t>(i)]->tokens;
        const int len = static_cast<int>(tokens.size()) - 1;
        std::copy_n(tokens.begin(), len, b.ids.begin() + static_cast<std::ptrdiff_t>(i) * b.seq);
        for (int t = examples[static_cast<std::size_t>(i)]->sep_index; t < len; ++t) {
            b.rows.push_back(i * b.seq + t);
            b.targets.push_back(tokens[static_cast<std::size_t>(t) + 1]);
        }
    }
    return b;
}

// ---- cached decoding ----

namespace {

template <class T>
class Decoder {
public:
    explicit Decoder(const BasicTransformer<T>& model)
        : model_(model), cfg_(model.config()), d_(cfg_.model_dim), hd_(d_ / cfg_.heads) {
        const std::size_t cache = static_cast<std::size_t>(cfg_.max_sequence) * d_;
        keys_.assign(static_cast<std::size_t>(cfg_.layers), std::vector<T>(cache));
        values_.assign(static_cast<std::size_t>(cfg_.layers), std::vector<T>(cache));
        x_.resize(d_);
        h_.resize(d_);
        qkv_.resize(3 * static_cast<std::size_t>(d_));
        att_.resize(d_);
        branch_.resize(d_);
        ff_.resize(static_cast<std::size_t>(cfg_.feedforward_dim));
        ff2_.resize(static_cast<std::size_t>(cfg_.feedforward_dim));
        probs_.resize(static_cast<std::size_t>(cfg_.max_sequence));
        logits_.resize(static_cast<std::size_t>(model.vocab_size()));
    }

    int position() const { return pos_; }

    // Feeds one token; returns the logits for the next position.
    const std::vector<T>& step(int token) {
        namespace k = kernels::serial;
        const auto& ps = model_.parameters();
        const auto& lay = model_.layout();
        auto W = [&](int index) { return ps[static_cast<std::size_t>(index)].value.data(); };
        const int t = pos_;
        const T* tok = W(lay.tok) + static_cast<std::size_t>(token) * d_;
        const T* pe = W(lay.pos) + static_cast<std::size_t>(t) * d_;
        for (int i = 0; i < d_; ++i) {
            x_[i] = tok[i] + pe[i];
        }
        T mean;
        T rstd;
        for (std::size_t l = 0; l < lay.layers.size(); ++l) {
            const auto& L = lay.layers[l];
            k::layernorm_forward(x_.data(), W(L.ln1_g), W(L.ln1_b), h_.data(), &mean, &rstd, 1, d_, T(1e-5));
            k::matmul(h_.data(), W(L.qkv_w), qkv_.data(), 1, d_, 3 * d_, false);
            k::add_row_vector(qkv_.data(), W(L.qkv_b), 1, 3 * d_);
            T* kc = keys_[l].data();
            T* vc = values_[l].data();
            std::copy_n(qkv_.data() + d_, d_, kc + static_cast<std::size_t>(t) * d_);
            std::copy_n(qkv_.data() + 2 * d_, d_, vc + static_cast<std::size_t>(t) * d_);
            for (int h = 0; h < cfg_.heads; ++h) {
                kernels::attend_row(qkv_.data() + h * hd_, kc + h * hd_, vc + h * hd_, static_cast<std::size_t>(d_),
                                    t + 1, hd_, probs_.data(), att_.data() + h * hd_);
            }
            k::matmul(att_.data(), W(L.out_w), branch_.data(), 1, d_, d_, false);
            k::add_row_vector(branch_.data(), W(L.out_b), 1, d_);
            for (int i = 0; i < d_; ++i) {
                x_[i] = x_[i] + branch_[i];
            }
            k::layernorm_forward(x_.data(), W(L.ln2_g), W(L.ln2_b), h_.data(), &mean, &rstd, 1, d_, T(1e-5));
            k::matmul(h_.data(), W(L.fc_w), ff_.data(), 1, d_, cfg_.feedforward_dim, false);
            k::add_row_vector(ff_.data(), W(L.fc_b), 1, cfg_.feedforward_dim);
            k::gelu_forward(ff_.data(), ff2_.data(), ff_.size());
            k::matmul(ff2_.data(), W(L.proj_w), branch_.data(), 1, cfg_.feedforward_dim, d_, false);
            k::add_row_vector(branch_.data(), W(L.proj_b), 1, d_);
            for (int i = 0; i < d_; ++i) {
                x_[i] = x_[i] + branch_[i];
            }
        }
        k::layernorm_forward(x_.data(), W(lay.lnf_g), W(lay.lnf_b), h_.data(), &mean, &rstd, 1, d_, T(1e-5));
        const int v = model_.vocab_size();
        k::matmul(h_.data(), W(lay.head_w), logits_.data(), 1, d_, v, false);
        k::add_row_vector(logits_.data(), W(lay.head_b), 1, v);
        ++pos_;
        return logits_;
    }

private:
    const BasicTransformer<T>& model_;
    const ModelConfig& cfg_;
    int d_;
    int hd_;
    int pos_ = 0;
    std::vector<std::vector<T>> keys_;
    std::vector<std::vector<T>> values_;
    std::vector<T> x_, h_, qkv_, att_, branch_, ff_, ff2_, probs_, logits_;
};

template <class T>
int pick_token(const std::vector<T>& logits, double temperature, Rng& rng) {
    const int v = static_cast<int>(logits.size());
    auto allowed = [](int id) { return id == Tokenizer::kEos || id >= Tokenizer::kSpecials; };
    if (temperature <= 0.0) {
        int best = Tokenizer::kEos;
        for (int id = 0; id < v; ++id) {
            if (allowed(id) && logits[static_cast<std::size_t>(id)] > logits[static_cast<std::size_t>(best)]) {
                best = id;
            }
        }
        return best;
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (int id = 0; id < v; ++id) {
        if (allowed(id)) {
            peak = std::max(peak, static_cast<double>(logits[static_cast<std::size_t>(id)]) / temperature);
        }
    }
    std::vector<double> weights(static_cast<std::size_t>(v), 0.0);
    for (int id = 0; id < v; ++id) {
        if (allowed(id)) {
            weights[static_cast<std::size_t>(id)] =
                std::exp(static_cast<double>(logits[static_cast<std::size_t>(id)]) / temperature - peak);
        }
    }
    return static_cast<int>(rng.categorical(weights));
}

}  // namespace

template <class T>
std::string generate(const BasicTransformer<T>& model, std::string_view question, int max_new_tokens,
                     const GenerateOptions& options) {
    if (max_new_tokens <= 0) {
        return {};
    }
    std::vector<int> prompt;
    prompt.push_back(Tokenizer::kBos);
    const auto q = model.tokenizer().encode(question);
    prompt.insert(prompt.end(), q.begin(), q.end());
    prompt.push_back(Tokenizer::kSep);
    const int limit = model.config().max_sequence;
    if (static_cast<int>(prompt.size()) > limit) {
        throw ModelError("question is longer than max_sequence " + std::to_string(limit));
    }
    Decoder<T> decoder(model);
    const std::vector<T>* logits = nullptr;
    for (const int id : prompt) {
        logits = &decoder.step(id);
    }
    Rng rng(options.seed);
    std::vector<int> out;
    for (int n = 0; n < max_new_tokens; ++n) {
        const int next = pick_token(*logits, options.temperature, rng);
        if (next == Tokenizer::kEos) {
            break;
        }
        out.push_back(next);
        if (decoder.position() >= limit) {
            break;
        }
        logits = &decoder.step(next);
    }
    return model.tokenizer().decode(out);
}

std::vector<std::string> generate_batch(const TinyTransformer& model, std::span<const std::string> questions,
                                        int max_new_tokens, double temperature,
                                        std::span<const std::uint64_t> seeds) {
    if (seeds.size() != questions.size()) {
        throw ModelError("generate_batch: one seed per question required");
    }
    std::vector<std::string> out(questions.size());
    const long long n = static_cast<long long>(questions.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (long long i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = generate(model, questions[static_cast<std::size_t>(i)], max_new_tokens,
                                                        GenerateOptions{temperature, seeds[static_cast<std::size_t>(i)]});
        } catch (...) {
#pragma omp critical
            failure = std::current_exception();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return out;
}

template <class T>
std::vector<T> incremental_logits(const BasicTransformer<T>& model, std::span<const int> tokens) {
    if (static_cast<int>(tokens.size()) > model.config().max_sequence) {
        throw ModelError("sequence exceeds max_sequence");
    }
    Decoder<T> decoder(model);
    std::vector<T> out;
    for (const int id : tokens) {
        const auto& row = decoder.step(id);
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

template class BasicTransformer<float>;
template class BasicTransformer<double>;
template std::string generate<float>(const BasicTransformer<float>&, std::string_view, int, const GenerateOptions&);
template std::string generate<double>(const BasicTransformer<double>&, std::string_view, int, const GenerateOptions&);
template std::vector<float> incremental_logits<float>(const BasicTransformer<float>&, std::span<const int>);
template std::vector<double> incremental_logits<double>(const BasicTransformer<double>&, std::span<const int>);

}  // namespace mentorkd
