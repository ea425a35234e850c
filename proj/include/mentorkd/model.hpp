#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mentorkd/autodiff.hpp"
#include "mentorkd/dataset.hpp"
#include "mentorkd/tokenizer.hpp"

namespace mentorkd {

class Rng;

struct ModelConfig {
    int layers = 2;
    int model_dim = 64;
    int heads = 2;
    int feedforward_dim = 256;
    int max_sequence = 256;
    double dropout_rate = 0.0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;

    // micro, student, mentor, large-mentor
    static ModelConfig preset(std::string_view name);
};

std::vector<std::string> preset_names();

enum class ModelRole { Mentor, Student };

std::string to_string(ModelRole role);
ModelRole parse_model_role(std::string_view name);

// Pre-LN decoder-only transformer with learned positions and an untied output head.
template <class T>
class BasicTransformer {
public:
    BasicTransformer() = default;
    BasicTransformer(const ModelConfig& config, Tokenizer tokenizer, ModelRole role, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }
    ModelRole role() const { return role_; }
    int vocab_size() const { return tokenizer_.vocab_size(); }

    std::vector<Parameter<T>>& parameters() { return params_; }
    const std::vector<Parameter<T>>& parameters() const { return params_; }
    Parameter<T>& parameter(std::string_view name);
    std::size_t parameter_count() const;
    static std::size_t parameter_count(const ModelConfig& config, int vocab_size);

    void zero_grad();

    // Teacher-forced logits. ids holds batch rows of `seq` tokens each. When
    // `rows` is non-empty only those flattened positions are projected to the
    // vocabulary. Dropout is applied only when `dropout_rng` is given.
    ag::Var forward(ag::Tape<T>& tape, std::span<const int> ids, int batch, int seq, std::span<const int> rows = {},
                    Rng* dropout_rng = nullptr);

    // Evaluation-mode logits for one batch, shape [batch, seq, vocab] flattened.
    std::vector<T> logits(std::span<const int> ids, int batch, int seq) const;

    template <class U>
    BasicTransformer<U> cast() const {
        BasicTransformer<U> out;
        out.config_ = config_;
        out.tokenizer_ = tokenizer_;
        out.role_ = role_;
        for (const auto& p : params_) {
            Parameter<U> q{p.name, p.rows, p.cols, std::vector<U>(p.value.begin(), p.value.end()), {}};
            out.params_.push_back(std::move(q));
        }
        out.index_parameters();
        return out;
    }

    // Used by checkpoint loading.
    static BasicTransformer from_parameters(const ModelConfig& config, Tokenizer tokenizer, ModelRole role,
                                            std::vector<Parameter<T>> params);

    struct LayerParams {
        int ln1_g, ln1_b, qkv_w, qkv_b, out_w, out_b, ln2_g, ln2_b, fc_w, fc_b, proj_w, proj_b;
    };
    struct Layout {
        int tok, pos, lnf_g, lnf_b, head_w, head_b;
        std::vector<LayerParams> layers;
    };
    const Layout& layout() const { return layout_; }

private:
    template <class U>
    friend class BasicTransformer;

    void index_parameters();

    ModelConfig config_;
    Tokenizer tokenizer_;
    ModelRole role_ = ModelRole::Student;
    std::vector<Parameter<T>> params_;
    Layout layout_{};
};

using TinyTransformer = BasicTransformer<float>;

// [BOS] question [SEP] label [EOS]; the model reads all but the last token
// and is scored from the SEP position onward.
struct EncodedExample {
    std::vector<int> tokens;
    int sep_index = 0;
};

EncodedExample encode_example(const Tokenizer& tokenizer, const TrainingExample& example);

struct SequenceBatch {
    int batch = 0;
    int seq = 0;
    std::vector<int> ids;      // [batch*seq], PAD beyond each sequence
    std::vector<int> rows;     // flattened positions inside the label span
    std::vector<int> targets;  // next-token id for each entry of rows
};

SequenceBatch make_batch(std::span<const EncodedExample* const> examples);

struct GenerateOptions {
    double temperature = 0.0;  // 0 -> greedy
    std::uint64_t seed = 0;
};

// Decodes from `BOS question SEP` with a key/value cache; returns the text
// after SEP up to EOS or the token budget. PAD, BOS and SEP are never emitted.
template <class T>
std::string generate(const BasicTransformer<T>& model, std::string_view question, int max_new_tokens,
                     const GenerateOptions& options = {});

// One output per (question, seed) pair; runs questions in parallel.
std::vector<std::string> generate_batch(const TinyTransformer& model, std::span<const std::string> questions,
                                        int max_new_tokens, double temperature,
                                        std::span<const std::uint64_t> seeds);

// Incremental logits for a token prefix via the cached decoder, one row per position.
template <class T>
std::vector<T> incremental_logits(const BasicTransformer<T>& model, std::span<const int> tokens);

}  // namespace mentorkd
