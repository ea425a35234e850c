#pragma once

// Tape-based reverse-mode differentiation over 2-D row-major buffers.
// Ops are coarse (linear, layernorm, attention, ...) so the tape stays short.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mentorkd {

// Leaves elements uninitialized on resize; op outputs are always fully written.
template <class T>
struct UninitializedAllocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = UninitializedAllocator<U>;
    };
    UninitializedAllocator() = default;
    template <class U>
    UninitializedAllocator(const UninitializedAllocator<U>&) noexcept {}
    template <class U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

template <class T>
struct Parameter {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<T> value;
    std::vector<T> grad;

    std::size_t size() const { return value.size(); }
};

class Rng;

namespace ag {

struct Var {
    int id = -1;
    const void* owner = nullptr;
    bool valid() const { return id >= 0; }
};

template <class T>
class Tape {
public:
    // With record=false nothing is kept for backward (inference mode).
    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return record_; }

    Var leaf(Parameter<T>& p);
    Var constant(int rows, int cols, std::vector<T> values);

    int rows(Var v) const { return node(v).rows; }
    int cols(Var v) const { return node(v).cols; }
    std::span<const T> value(Var v) const;
    T scalar(Var v) const;

    // Seeds d(loss)/d(loss)=1 and runs every recorded closure in reverse.
    // Parameter leaves accumulate into Parameter::grad.
    void backward(Var loss);

    // ---- internal interface used by the ops ----
    struct Node {
        int rows = 0;
        int cols = 0;
        std::vector<T, UninitializedAllocator<T>> storage;
        T* value = nullptr;
        std::vector<T> grad_storage;
        T* grad = nullptr;
        bool requires_grad = false;
        std::function<void()> backward;
    };
    Var push(int rows, int cols, bool requires_grad);
    Node& node(Var v);
    const Node& node(Var v) const;
    T* grad(Var v);  // allocates (zeroed) on first use; nullptr if !requires_grad

private:
    void check(Var v) const;

    bool record_;
    bool backward_done_ = false;
    std::deque<Node> nodes_;
};

// ---- ops ----
// ids: [batch*seq] token ids; returns tok[ids] + pos[t].
template <class T>
Var embed(Tape<T>& tape, Var token_table, Var position_table, std::span<const int> ids, int batch, int seq);
template <class T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias);  // x[m,in] * W[in,out] + b[1,out]
template <class T>
Var layernorm(Tape<T>& tape, Var x, Var gamma, Var beta, T eps = T(1e-5));
template <class T>
Var gelu(Tape<T>& tape, Var x);
template <class T>
Var add(Tape<T>& tape, Var a, Var b);
template <class T>
Var scale(Tape<T>& tape, Var a, T factor);
template <class T>
Var sum(Tape<T>& tape, Var a);  // scalar
template <class T>
Var causal_attention(Tape<T>& tape, Var qkv, int batch, int seq, int heads);
template <class T>
Var gather_rows(Tape<T>& tape, Var x, std::span<const int> rows);
template <class T>
Var dropout(Tape<T>& tape, Var x, T rate, Rng& rng);
// Mean over rows of -log softmax(logits[r])[targets[r]].
template <class T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets);
// Mean over rows of sum_k p_k (ln max(p_k, eps) - ln max(q_k, eps)), q = softmax(logits / tau).
// `reference` is a constant [rows, vocab] probability table.
template <class T>
Var soft_label_kl(Tape<T>& tape, Var logits, std::span<const T> reference, T temperature, T eps = T(1e-8));

}  // namespace ag
}  // namespace mentorkd
