#pragma once

// Dense kernels used by the autodiff ops and the inference path.
// All matrices are row-major. Functions taking `accumulate` add into the
// destination instead of overwriting it.
//
// The parallel variants split work over independent output rows (or
// attention heads) and call the same per-row routines as the serial ones,
// so both produce bit-identical results.

#include <cstddef>

namespace mentorkd::kernels {

enum class Backend { Serial, Parallel };

void set_backend(Backend backend);
Backend backend();

#define MENTORKD_KERNEL_DECLS                                                                                  \
    /* C[m,n] (+)= A[m,k] B[k,n] */                                                                            \
    template <class T>                                                                                         \
    void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);                           \
    /* C[m,n] (+)= A[r,m]^T B[r,n] */                                                                          \
    template <class T>                                                                                         \
    void matmul_at_b(const T* a, const T* b, T* c, int r, int m, int n, bool accumulate);                      \
    /* C[m,n] (+)= A[m,k] B[n,k]^T */                                                                          \
    template <class T>                                                                                         \
    void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate);                      \
    template <class T>                                                                                         \
    void add_row_vector(T* c, const T* v, int m, int n);                                                       \
    /* out[n] += sum over rows of x[m,n] */                                                                    \
    template <class T>                                                                                         \
    void column_sum(const T* x, T* out, int m, int n);                                                         \
    template <class T>                                                                                         \
    void layernorm_forward(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int m, int n,    \
                           T eps);                                                                             \
    template <class T>                                                                                         \
    void layernorm_backward(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx,      \
                            T* dgamma, T* dbeta, int m, int n);                                                \
    template <class T>                                                                                         \
    void gelu_forward(const T* x, T* y, std::size_t count);                                                    \
    template <class T>                                                                                         \
    void gelu_backward(const T* x, const T* dy, T* dx, std::size_t count);                                     \
    /* qkv: [batch*seq, 3*dim] laid out as q|k|v, heads contiguous inside each.                                \
       out: [batch*seq, dim]; probs: [batch, heads, seq, seq], zero above the diagonal. */                     \
    template <class T>                                                                                         \
    void attention_forward(const T* qkv, T* out, T* probs, int batch, int seq, int heads, int dim);            \
    template <class T>                                                                                         \
    void attention_backward(const T* dout, const T* qkv, const T* probs, T* dqkv, int batch, int seq,          \
                            int heads, int dim);                                                               \
    /* Row-wise softmax of x / temperature. */                                                                 \
    template <class T>                                                                                         \
    void softmax_rows(const T* x, T* y, int m, int n, T temperature);

namespace serial {
MENTORKD_KERNEL_DECLS
}
namespace parallel {
MENTORKD_KERNEL_DECLS
}

#undef MENTORKD_KERNEL_DECLS

// Single-query causal attention against cached keys/values (stride = row
// pitch of k and v). Shared by attention_forward and incremental decoding.
template <class T>
void attend_row(const T* q, const T* k, const T* v, std::size_t stride, int length, int head_dim, T* probs,
                T* out);

// Dispatching front-ends.
template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    backend() == Backend::Serial ? serial::matmul(a, b, c, m, k, n, accumulate)
                                 : parallel::matmul(a, b, c, m, k, n, accumulate);
}
template <class T>
void matmul_at_b(const T* a, const T* b, T* c, int r, int m, int n, bool accumulate) {
    backend() == Backend::Serial ? serial::matmul_at_b(a, b, c, r, m, n, accumulate)
                                 : parallel::matmul_at_b(a, b, c, r, m, n, accumulate);
}
template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    backend() == Backend::Serial ? serial::matmul_a_bt(a, b, c, m, k, n, accumulate)
                                 : parallel::matmul_a_bt(a, b, c, m, k, n, accumulate);
}
template <class T>
void add_row_vector(T* c, const T* v, int m, int n) {
    backend() == Backend::Serial ? serial::add_row_vector(c, v, m, n) : parallel::add_row_vector(c, v, m, n);
}
template <class T>
void column_sum(const T* x, T* out, int m, int n) {
    backend() == Backend::Serial ? serial::column_sum(x, out, m, n) : parallel::column_sum(x, out, m, n);
}
template <class T>
void layernorm_forward(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int m, int n, T eps) {
    backend() == Backend::Serial ? serial::layernorm_forward(x, gamma, beta, y, mean, rstd, m, n, eps)
                                 : parallel::layernorm_forward(x, gamma, beta, y, mean, rstd, m, n, eps);
}
template <class T>
void layernorm_backward(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx, T* dgamma,
                        T* dbeta, int m, int n) {
    backend() == Backend::Serial ? serial::layernorm_backward(dy, x, gamma, mean, rstd, dx, dgamma, dbeta, m, n)
                                 : parallel::layernorm_backward(dy, x, gamma, mean, rstd, dx, dgamma, dbeta, m, n);
}
template <class T>
void gelu_forward(const T* x, T* y, std::size_t count) {
    backend() == Backend::Serial ? serial::gelu_forward(x, y, count) : parallel::gelu_forward(x, y, count);
}
template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t count) {
    backend() == Backend::Serial ? serial::gelu_backward(x, dy, dx, count) : parallel::gelu_backward(x, dy, dx, count);
}
template <class T>
void attention_forward(const T* qkv, T* out, T* probs, int batch, int seq, int heads, int dim) {
    backend() == Backend::Serial ? serial::attention_forward(qkv, out, probs, batch, seq, heads, dim)
                                 : parallel::attention_forward(qkv, out, probs, batch, seq, heads, dim);
}
template <class T>
void attention_backward(const T* dout, const T* qkv, const T* probs, T* dqkv, int batch, int seq, int heads, int dim) {
    backend() == Backend::Serial ? serial::attention_backward(dout, qkv, probs, dqkv, batch, seq, heads, dim)
                                 : parallel::attention_backward(dout, qkv, probs, dqkv, batch, seq, heads, dim);
}
template <class T>
void softmax_rows(const T* x, T* y, int m, int n, T temperature) {
    backend() == Backend::Serial ? serial::softmax_rows(x, y, m, n, temperature)
                                 : parallel::softmax_rows(x, y, m, n, temperature);
}

}  // namespace mentorkd::kernels
