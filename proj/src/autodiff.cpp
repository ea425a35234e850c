#include "mentorkd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mentorkd/error.hpp"
#include "mentorkd/kernels.hpp"
#include "mentorkd/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mentorkd::ag {

#if defined(__GLIBC__)
namespace {
// Keep large activation buffers inside the heap between steps instead of
// mapping and faulting them in again for every tape.
const bool g_heap_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
}();
}  // namespace
#endif

template <class T>
void Tape<T>::check(Var v) const {
    if (v.owner != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw ModelError("variable does not belong to this tape");
    }
}

template <class T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)];
}

template <class T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)];
}

template <class T>
Var Tape<T>::push(int rows, int cols, bool requires_grad) {
    Node& n = nodes_.emplace_back();
    n.rows = rows;
    n.cols = cols;
    n.storage.resize(static_cast<std::size_t>(rows) * cols);
    n.value = n.storage.data();
    n.requires_grad = record_ && requires_grad;
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

template <class T>
Var Tape<T>::leaf(Parameter<T>& p) {
    Node& n = nodes_.emplace_back();
    n.rows = p.rows;
    n.cols = p.cols;
    n.value = p.value.data();
    n.requires_grad = record_;
    if (record_) {
        if (p.grad.size() != p.value.size()) {
            p.grad.assign(p.value.size(), T(0));
        }
        n.grad = p.grad.data();
    }
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

template <class T>
Var Tape<T>::constant(int rows, int cols, std::vector<T> values) {
    if (values.size() != static_cast<std::size_t>(rows) * cols) {
        throw ModelError("constant: value count does not match shape");
    }
    Node& n = nodes_.emplace_back();
    n.rows = rows;
    n.cols = cols;
    n.storage.assign(values.begin(), values.end());
    n.value = n.storage.data();
    return Var{static_cast<int>(nodes_.size()) - 1, this};
}

template <class T>
std::span<const T> Tape<T>::value(Var v) const {
    const Node& n = node(v);
    return {n.value, static_cast<std::size_t>(n.rows) * n.cols};
}

template <class T>
T Tape<T>::scalar(Var v) const {
    const Node& n = node(v);
    if (n.rows * n.cols != 1) {
        throw ModelError("scalar(): variable is not 1x1");
    }
    return n.value[0];
}

template <class T>
T* Tape<T>::grad(Var v) {
    Node& n = node(v);
    if (!n.requires_grad) {
        return nullptr;
    }
    if (n.grad == nullptr) {
        n.grad_storage.assign(static_cast<std::size_t>(n.rows) * n.cols, T(0));
        n.grad = n.grad_storage.data();
    }
    return n.grad;
}

template <class T>
void Tape<T>::backward(Var loss) {
    Node& l = node(loss);
    if (l.rows * l.cols != 1) {
        throw ModelError("backward() needs a scalar loss");
    }
    if (!l.requires_grad) {
        throw ModelError("backward() on a detached loss (no path to any parameter)");
    }
    if (backward_done_) {
        throw ModelError("backward() already ran on this tape");
    }
    backward_done_ = true;
    grad(loss)[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->requires_grad && it->grad != nullptr && it->backward) {
            it->backward();
        }
    }
}

namespace {

template <class T>
bool any_grad(Tape<T>& tape, std::initializer_list<Var> vars) {
    return std::any_of(vars.begin(), vars.end(), [&](Var v) { return tape.node(v).requires_grad; });
}

}  // namespace

template <class T>
Var embed(Tape<T>& tape, Var token_table, Var position_table, std::span<const int> ids, int batch, int seq) {
    const int dim = tape.cols(token_table);
    const int vocab = tape.rows(token_table);
    if (tape.cols(position_table) != dim || tape.rows(position_table) < seq) {
        throw ModelError("embed: position table too small for sequence length " + std::to_string(seq));
    }
    if (ids.size() != static_cast<std::size_t>(batch) * seq) {
        throw ModelError("embed: id count does not match batch*seq");
    }
    const Var out = tape.push(batch * seq, dim, any_grad(tape, {token_table, position_table}));
    T* y = tape.node(out).value;
    const T* tok = tape.node(token_table).value;
    const T* pos = tape.node(position_table).value;
    for (int r = 0; r < batch * seq; ++r) {
        const int id = ids[static_cast<std::size_t>(r)];
        if (id < 0 || id >= vocab) {
            throw ModelError("embed: token id " + std::to_string(id) + " outside vocabulary");
        }
        const int t = r % seq;
        for (int d = 0; d < dim; ++d) {
            y[static_cast<std::size_t>(r) * dim + d] = tok[static_cast<std::size_t>(id) * dim + d] +
                                                       pos[static_cast<std::size_t>(t) * dim + d];
        }
    }
    if (tape.node(out).requires_grad) {
        std::vector<int> saved(ids.begin(), ids.end());
        tape.node(out).backward = [&tape, out, token_table, position_table, saved = std::move(saved), seq, dim]() {
            const T* g = tape.grad(out);
            T* gt = tape.grad(token_table);
            T* gp = tape.grad(position_table);
            for (std::size_t r = 0; r < saved.size(); ++r) {
                const int t = static_cast<int>(r) % seq;
                for (int d = 0; d < dim; ++d) {
                    const T v = g[r * dim + d];
                    if (gt) gt[static_cast<std::size_t>(saved[r]) * dim + d] += v;
                    if (gp) gp[static_cast<std::size_t>(t) * dim + d] += v;
                }
            }
        };
    }
    return out;
}

template <class T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias) {
    const int m = tape.rows(x);
    const int in = tape.cols(x);
    const int outd = tape.cols(weight);
    if (tape.rows(weight) != in || tape.cols(bias) != outd || tape.rows(bias) != 1) {
        throw ModelError("linear: shape mismatch");
    }
    const Var out = tape.push(m, outd, any_grad(tape, {x, weight, bias}));
    T* y = tape.node(out).value;
    kernels::matmul(tape.node(x).value, tape.node(weight).value, y, m, in, outd, false);
    kernels::add_row_vector(y, tape.node(bias).value, m, outd);
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, x, weight, bias, m, in, outd]() {
            const T* g = tape.grad(out);
            if (T* gx = tape.grad(x)) {
                kernels::matmul_a_bt(g, tape.node(weight).value, gx, m, outd, in, true);
            }
            if (T* gw = tape.grad(weight)) {
                kernels::matmul_at_b(tape.node(x).value, g, gw, m, in, outd, true);
            }
            if (T* gb = tape.grad(bias)) {
                kernels::column_sum(g, gb, m, outd);
            }
        };
    }
    return out;
}

template <class T>
Var layernorm(Tape<T>& tape, Var x, Var gamma, Var beta, T eps) {
    const int m = tape.rows(x);
    const int n = tape.cols(x);
    if (tape.cols(gamma) != n || tape.cols(beta) != n) {
        throw ModelError("layernorm: shape mismatch");
    }
    const Var out = tape.push(m, n, any_grad(tape, {x, gamma, beta}));
    std::vector<T> mean(static_cast<std::size_t>(m));
    std::vector<T> rstd(static_cast<std::size_t>(m));
    kernels::layernorm_forward(tape.node(x).value, tape.node(gamma).value, tape.node(beta).value,
                               tape.node(out).value, mean.data(), rstd.data(), m, n, eps);
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, x, gamma, beta, m, n, mean = std::move(mean),
                                   rstd = std::move(rstd)]() {
            T* gg = tape.grad(gamma);
            T* gb = tape.grad(beta);
            if (gg == nullptr || gb == nullptr) {
                gg = gb = nullptr;
            }
            kernels::layernorm_backward(tape.grad(out), tape.node(x).value, tape.node(gamma).value, mean.data(),
                                        rstd.data(), tape.grad(x), gg, gb, m, n);
        };
    }
    return out;
}

template <class T>
Var gelu(Tape<T>& tape, Var x) {
    const auto& xn = tape.node(x);
    const Var out = tape.push(xn.rows, xn.cols, xn.requires_grad);
    const std::size_t count = static_cast<std::size_t>(xn.rows) * xn.cols;
    kernels::gelu_forward(tape.node(x).value, tape.node(out).value, count);
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, x, count]() {
            kernels::gelu_backward(tape.node(x).value, tape.grad(out), tape.grad(x), count);
        };
    }
    return out;
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
    if (tape.rows(a) != tape.rows(b) || tape.cols(a) != tape.cols(b)) {
        throw ModelError("add: shape mismatch");
    }
    const Var out = tape.push(tape.rows(a), tape.cols(a), any_grad(tape, {a, b}));
    const std::size_t count = static_cast<std::size_t>(tape.rows(a)) * tape.cols(a);
    const T* av = tape.node(a).value;
    const T* bv = tape.node(b).value;
    T* y = tape.node(out).value;
    for (std::size_t i = 0; i < count; ++i) {
        y[i] = av[i] + bv[i];
    }
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, a, b, count]() {
            const T* g = tape.grad(out);
            for (Var v : {a, b}) {
                if (T* gv = tape.grad(v)) {
                    for (std::size_t i = 0; i < count; ++i) {
                        gv[i] += g[i];
                    }
                }
            }
        };
    }
    return out;
}

template <class T>
Var scale(Tape<T>& tape, Var a, T factor) {
    const Var out = tape.push(tape.rows(a), tape.cols(a), tape.node(a).requires_grad);
    const std::size_t count = static_cast<std::size_t>(tape.rows(a)) * tape.cols(a);
    const T* av = tape.node(a).value;
    T* y = tape.node(out).value;
    for (std::size_t i = 0; i < count; ++i) {
        y[i] = av[i] * factor;
    }
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, a, factor, count]() {
            const T* g = tape.grad(out);
            T* ga = tape.grad(a);
            for (std::size_t i = 0; i < count; ++i) {
                ga[i] += g[i] * factor;
            }
        };
    }
    return out;
}

template <class T>
Var sum(Tape<T>& tape, Var a) {
    const Var out = tape.push(1, 1, tape.node(a).requires_grad);
    const std::size_t count = static_cast<std::size_t>(tape.rows(a)) * tape.cols(a);
    const T* av = tape.node(a).value;
    T total = 0;
    for (std::size_t i = 0; i < count; ++i) {
        total += av[i];
    }
    tape.node(out).value[0] = total;
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, a, count]() {
            const T g = tape.grad(out)[0];
            T* ga = tape.grad(a);
            for (std::size_t i = 0; i < count; ++i) {
                ga[i] += g;
            }
        };
    }
    return out;
}

template <class T>
Var causal_attention(Tape<T>& tape, Var qkv, int batch, int seq, int heads) {
    const int dim = tape.cols(qkv) / 3;
    if (tape.cols(qkv) != 3 * dim || tape.rows(qkv) != batch * seq || dim % heads != 0) {
        throw ModelError("causal_attention: shape mismatch");
    }
    const Var out = tape.push(batch * seq, dim, tape.node(qkv).requires_grad);
    std::vector<T> probs(static_cast<std::size_t>(batch) * heads * seq * seq);
    kernels::attention_forward(tape.node(qkv).value, tape.node(out).value, probs.data(), batch, seq, heads, dim);
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, qkv, batch, seq, heads, dim, probs = std::move(probs)]() {
            kernels::attention_backward(tape.grad(out), tape.node(qkv).value, probs.data(), tape.grad(qkv), batch,
                                        seq, heads, dim);
        };
    }
    return out;
}

template <class T>
Var gather_rows(Tape<T>& tape, Var x, std::span<const int> rows) {
    const int n = tape.cols(x);
    const int m = tape.rows(x);
    const Var out = tape.push(static_cast<int>(rows.size()), n, tape.node(x).requires_grad);
    const T* xv = tape.node(x).value;
    T* y = tape.node(out).value;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= m) {
            throw ModelError("gather_rows: row index out of range");
        }
        std::copy_n(xv + static_cast<std::size_t>(rows[i]) * n, n, y + i * n);
    }
    if (tape.node(out).requires_grad) {
        std::vector<int> saved(rows.begin(), rows.end());
        tape.node(out).backward = [&tape, out, x, n, saved = std::move(saved)]() {
            const T* g = tape.grad(out);
            T* gx = tape.grad(x);
            for (std::size_t i = 0; i < saved.size(); ++i) {
                T* dst = gx + static_cast<std::size_t>(saved[i]) * n;
                for (int j = 0; j < n; ++j) {
                    dst[j] += g[i * n + j];
                }
            }
        };
    }
    return out;
}

template <class T>
Var dropout(Tape<T>& tape, Var x, T rate, Rng& rng) {
    if (rate <= T(0)) {
        return x;
    }
    if (rate >= T(1)) {
        throw ModelError("dropout rate must be below 1");
    }
    const std::size_t count = static_cast<std::size_t>(tape.rows(x)) * tape.cols(x);
    std::vector<T> mask(count);
    const T keep_scale = T(1) / (T(1) - rate);
    for (auto& m : mask) {
        m = rng.bernoulli(static_cast<double>(rate)) ? T(0) : keep_scale;
    }
    const Var out = tape.push(tape.rows(x), tape.cols(x), tape.node(x).requires_grad);
    const T* xv = tape.node(x).value;
    T* y = tape.node(out).value;
    for (std::size_t i = 0; i < count; ++i) {
        y[i] = xv[i] * mask[i];
    }
    if (tape.node(out).requires_grad) {
        tape.node(out).backward = [&tape, out, x, mask = std::move(mask)]() {
            const T* g = tape.grad(out);
            T* gx = tape.grad(x);
            for (std::size_t i = 0; i < mask.size(); ++i) {
                gx[i] += g[i] * mask[i];
            }
        };
    }
    return out;
}

template <class T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const int> targets) {
    const int m = tape.rows(logits);
    const int v = tape.cols(logits);
    if (static_cast<std::size_t>(m) != targets.size()) {
        throw ModelError("cross_entropy: target count does not match logit rows");
    }
    if (m == 0) {
        throw ModelError("cross_entropy: every position is masked");
    }
    std::vector<T> probs(static_cast<std::size_t>(m) * v);
    kernels::softmax_rows(tape.node(logits).value, probs.data(), m, v, T(1));
    const T* z = tape.node(logits).value;
    T total = 0;
    for (int r = 0; r < m; ++r) {
        const T* zr = z + static_cast<std::size_t>(r) * v;
        const int target = targets[static_cast<std::size_t>(r)];
        if (target < 0 || target >= v) {
            throw ModelError("cross_entropy: target id outside vocabulary");
        }
        const T peak = *std::max_element(zr, zr + v);
        T acc = 0;
        for (int k = 0; k < v; ++k) {
            acc += std::exp(zr[k] - peak);
        }
        total += std::log(acc) + peak - zr[target];
    }
    const Var out = tape.push(1, 1, tape.node(logits).requires_grad);
    tape.node(out).value[0] = total / static_cast<T>(m);
    if (tape.node(out).requires_grad) {
        std::vector<int> saved(targets.begin(), targets.end());
        tape.node(out).backward = [&tape, out, logits, m, v, probs = std::move(probs), saved = std::move(saved)]() {
            const T g = tape.grad(out)[0] / static_cast<T>(m);
            T* gz = tape.grad(logits);
            for (int r = 0; r < m; ++r) {
                const T* pr = probs.data() + static_cast<std::size_t>(r) * v;
                T* gr = gz + static_cast<std::size_t>(r) * v;
                for (int k = 0; k < v; ++k) {
                    gr[k] += g * pr[k];
                }
                gr[saved[static_cast<std::size_t>(r)]] -= g;
            }
        };
    }
    return out;
}

template <class T>
Var soft_label_kl(Tape<T>& tape, Var logits, std::span<const T> reference, T temperature, T eps) {
    const int m = tape.rows(logits);
    const int v = tape.cols(logits);
    if (reference.size() != static_cast<std::size_t>(m) * v) {
        throw ModelError("soft_label_kl: reference distribution shape does not match logits");
    }
    if (!(temperature > T(0))) {
        throw ConfigError("temperature must be positive");
    }
    if (m == 0) {
        throw ModelError("soft_label_kl: no positions");
    }
    std::vector<T> q(static_cast<std::size_t>(m) * v);
    kernels::softmax_rows(tape.node(logits).value, q.data(), m, v, temperature);
    T total = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const T p = reference[i];
        if (p > T(0)) {
            total += p * (std::log(std::max(p, eps)) - std::log(std::max(q[i], eps)));
        }
    }
    const Var out = tape.push(1, 1, tape.node(logits).requires_grad);
    tape.node(out).value[0] = total / static_cast<T>(m);
    if (tape.node(out).requires_grad) {
        std::vector<T> ref(reference.begin(), reference.end());
        tape.node(out).backward = [&tape, out, logits, m, v, temperature, eps, q = std::move(q),
                                   ref = std::move(ref)]() {
            const T g = tape.grad(out)[0] / (static_cast<T>(m) * temperature);
            T* gz = tape.grad(logits);
            for (int r = 0; r < m; ++r) {
                const std::size_t base = static_cast<std::size_t>(r) * v;
                T live_mass = 0;
                for (int k = 0; k < v; ++k) {
                    if (q[base + k] >= eps) {
                        live_mass += ref[base + k];
                    }
                }
                for (int k = 0; k < v; ++k) {
                    const T own = q[base + k] >= eps ? ref[base + k] : T(0);
                    gz[base + k] += g * (q[base + k] * live_mass - own);
                }
            }
        };
    }
    return out;
}

#define MENTORKD_INSTANTIATE(T)                                                                                  \
    template class Tape<T>;                                                                                      \
    template Var embed<T>(Tape<T>&, Var, Var, std::span<const int>, int, int);                                   \
    template Var linear<T>(Tape<T>&, Var, Var, Var);                                                             \
    template Var layernorm<T>(Tape<T>&, Var, Var, Var, T);                                                       \
    template Var gelu<T>(Tape<T>&, Var);                                                                         \
    template Var add<T>(Tape<T>&, Var, Var);                                                                     \
    template Var scale<T>(Tape<T>&, Var, T);                                                                     \
    template Var sum<T>(Tape<T>&, Var);                                                                          \
    template Var causal_attention<T>(Tape<T>&, Var, int, int, int);                                              \
    template Var gather_rows<T>(Tape<T>&, Var, std::span<const int>);                                            \
    template Var dropout<T>(Tape<T>&, Var, T, Rng&);                                                             \
    template Var cross_entropy<T>(Tape<T>&, Var, std::span<const int>);                                          \
    template Var soft_label_kl<T>(Tape<T>&, Var, std::span<const T>, T, T);

MENTORKD_INSTANTIATE(float)
MENTORKD_INSTANTIATE(double)

}  // namespace mentorkd::ag
