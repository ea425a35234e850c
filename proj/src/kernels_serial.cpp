#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <type_traits>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "kernel_rows.hpp"
#include "mentorkd/kernels.hpp"

namespace mentorkd::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::Parallel};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

namespace detail {

template <class T>
struct Lanes {
    static constexpr int kWidth = 64 / static_cast<int>(sizeof(T));
    typedef T Vector __attribute__((vector_size(64)));

    static Vector load(const T* p) {
        Vector v;
        std::memcpy(&v, p, sizeof v);
        return v;
    }
    static void store(T* p, const Vector& v) { std::memcpy(p, &v, sizeof v); }
};

// Dot product with a fixed lane-split summation order.
template <class T>
inline T dot(const T* __restrict a, const T* __restrict b, int n) {
    using L = Lanes<T>;
    int i = 0;
    T s = 0;
    if (n >= L::kWidth) {
        typename L::Vector acc{};
        for (; i + L::kWidth <= n; i += L::kWidth) {
            acc += L::load(a + i) * L::load(b + i);
        }
        for (int lane = 0; lane < L::kWidth; ++lane) {
            s += acc[lane];
        }
    }
    for (; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// y += alpha * x
template <class T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

// tanh on 16 floats at once. exp(-2|x|) via Cody-Waite reduction and a
// degree-6 polynomial; |x| is clamped at 9 where tanh rounds to 1 anyway.
// Written with vector extensions: the scalar form gets jump-threaded by GCC
// and never vectorizes.
inline Lanes<float>::Vector tanh16(Lanes<float>::Vector x) {
    using V = Lanes<float>::Vector;
    typedef std::int32_t I __attribute__((vector_size(64)));
    const I sign_mask = I{} + std::int32_t(0x80000000);
    const I bits = reinterpret_cast<I&>(x);
    const I sign = bits & sign_mask;
    V a = reinterpret_cast<const V&>(static_cast<const I&>(bits & ~sign_mask));
    a = a < 9.0F ? a : V{} + 9.0F;
    const V z = -2.0F * a;
    const V round = V{} + 12582912.0F;  // 1.5 * 2^23
    const V n = (z * 1.44269504088896341F + round) - round;
    const V r = (z - n * 0.693359375F) + n * 2.12194440e-4F;
    V p = V{} + 1.3981999507E-3F;
    p = p * r + 8.3334519073E-3F;
    p = p * r + 4.1665795894E-2F;
    p = p * r + 1.6666665459E-1F;
    p = p * r + 5.0000001201E-1F;
    p = p * r * r + r + 1.0F;
    const I scale_bits = (__builtin_convertvector(n, I) + 127) << 23;
    const V e = p * reinterpret_cast<const V&>(scale_bits);
    const V t = (1.0F - e) / (1.0F + e);
    const I out = reinterpret_cast<const I&>(t) | sign;
    return reinterpret_cast<const V&>(out);
}

}  // namespace detail

template <class T>
__attribute__((noinline)) void attend_row(const T* q, const T* k, const T* v, std::size_t stride, int length,
                                          int head_dim, T* probs, T* out) {
    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
    T peak = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < length; ++j) {
        const T s = detail::dot(q, k + j * stride, head_dim) * scale;
        probs[j] = s;
        peak = std::max(peak, s);
    }
    T total = 0;
    for (int j = 0; j < length; ++j) {
        probs[j] = std::exp(probs[j] - peak);
        total += probs[j];
    }
    const T inv = T(1) / total;
    std::fill(out, out + head_dim, T(0));
    for (int j = 0; j < length; ++j) {
        probs[j] *= inv;
        detail::axpy(probs[j], v + j * stride, out, head_dim);
    }
}

namespace detail {

// Register-blocked: an MR x NR tile of C lives in a local accumulator while k
// advances. Every element is still summed in increasing k, starting from 0 or
// from the existing value, so results do not depend on the blocking. The
// edge variant handles tiles narrower than NR with the same arithmetic.

template <class T, int MR, int NR>
inline void gemm_tile(const T* __restrict a, std::size_t lda, const T* __restrict b, std::size_t ldb,
                      T* __restrict c, std::size_t ldc, int k, bool accumulate) {
    using L = Lanes<T>;
    constexpr int NV = NR / L::kWidth;
    typename L::Vector acc[MR][NV];
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) {
            acc[r][v] = accumulate ? L::load(c + r * ldc + v * L::kWidth) : typename L::Vector{};
        }
    }
    for (int kk = 0; kk < k; ++kk) {
        const T* bk = b + kk * ldb;
        typename L::Vector bv[NV];
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) {
            bv[v] = L::load(bk + v * L::kWidth);
        }
#pragma GCC unroll 8
        for (int r = 0; r < MR; ++r) {
            const T av = a[r * lda + kk];
#pragma GCC unroll 8
            for (int v = 0; v < NV; ++v) {
                acc[r][v] += av * bv[v];
            }
        }
    }
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) {
            L::store(c + r * ldc + v * L::kWidth, acc[r][v]);
        }
    }
}

template <class T>
void gemm_edge(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, int rows, int k,
               int width, bool accumulate) {
    for (int r = 0; r < rows; ++r) {
        T* cr = c + r * ldc;
        if (!accumulate) {
            std::fill(cr, cr + width, T(0));
        }
        for (int kk = 0; kk < k; ++kk) {
            const T av = a[r * lda + kk];
            const T* bk = b + kk * ldb;
            for (int j = 0; j < width; ++j) {
                cr[j] += av * bk[j];
            }
        }
    }
}

template <class T>
constexpr int kTileCols = 64 / static_cast<int>(sizeof(T)) * 2;  // two cache lines

template <class T>
void matmul_rows(const T* a, const T* b, T* c, int row_begin, int row_end, int k, int n, bool accumulate) {
    constexpr int NR = kTileCols<T>;
    constexpr int MR = 4;
    const std::size_t lda = static_cast<std::size_t>(k);
    const std::size_t ldn = static_cast<std::size_t>(n);
    for (int j0 = 0; j0 < n; j0 += NR) {
        const int width = std::min(NR, n - j0);
        if (width < NR) {
            gemm_edge(a + row_begin * lda, lda, b + j0, ldn, c + row_begin * ldn + j0, ldn, row_end - row_begin, k,
                      width, accumulate);
            continue;
        }
        int i = row_begin;
        for (; i + MR <= row_end; i += MR) {
            gemm_tile<T, MR, NR>(a + i * lda, lda, b + j0, ldn, c + i * ldn + j0, ldn, k, accumulate);
        }
        for (; i < row_end; ++i) {
            gemm_tile<T, 1, NR>(a + i * lda, lda, b + j0, ldn, c + i * ldn + j0, ldn, k, accumulate);
        }
    }
}

template <class T, int MR, int NR>
inline void at_b_tile(const T* __restrict a, std::size_t lda, const T* __restrict b, std::size_t ldb,
                      T* __restrict c, std::size_t ldc, int rows) {
    using L = Lanes<T>;
    constexpr int NV = NR / L::kWidth;
    typename L::Vector acc[MR][NV];
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) {
            acc[r][v] = L::load(c + r * ldc + v * L::kWidth);
        }
    }
    for (int rr = 0; rr < rows; ++rr) {
        const T* ar = a + rr * lda;
        const T* br = b + rr * ldb;
        typename L::Vector bv[NV];
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) {
            bv[v] = L::load(br + v * L::kWidth);
        }
#pragma GCC unroll 8
        for (int r = 0; r < MR; ++r) {
            const T av = ar[r];
#pragma GCC unroll 8
            for (int v = 0; v < NV; ++v) {
                acc[r][v] += av * bv[v];
            }
        }
    }
#pragma GCC unroll 8
    for (int r = 0; r < MR; ++r) {
#pragma GCC unroll 8
        for (int v = 0; v < NV; ++v) {
            L::store(c + r * ldc + v * L::kWidth, acc[r][v]);
        }
    }
}

template <class T>
void at_b_edge(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, int mr, int width,
               int rows) {
    for (int rr = 0; rr < rows; ++rr) {
        const T* ar = a + rr * lda;
        const T* br = b + rr * ldb;
        for (int r = 0; r < mr; ++r) {
            const T av = ar[r];
            T* cr = c + r * ldc;
            for (int j = 0; j < width; ++j) {
                cr[j] += av * br[j];
            }
        }
    }
}

// C[i, :] over i in [row_begin, row_end) += sum_r A[r, i] B[r, :], with r
// processed in chunks so the streamed panels stay cache resident.
template <class T>
void matmul_at_b_rows(const T* a, const T* b, T* c, int row_begin, int row_end, int r, int m, int n,
                      bool accumulate) {
    constexpr int NR = kTileCols<T>;
    constexpr int MR = 4;
    constexpr int kChunk = 256;
    const std::size_t ldn = static_cast<std::size_t>(n);
    const std::size_t lda = static_cast<std::size_t>(m);
    if (!accumulate) {
        std::fill(c + row_begin * ldn, c + row_end * ldn, T(0));
    }
    for (int r0 = 0; r0 < r; r0 += kChunk) {
        const int rows = std::min(kChunk, r - r0);
        const T* ap = a + r0 * lda;
        const T* bp = b + r0 * ldn;
        for (int j0 = 0; j0 < n; j0 += NR) {
            const int width = std::min(NR, n - j0);
            for (int i0 = row_begin; i0 < row_end; i0 += MR) {
                const int mr = std::min(MR, row_end - i0);
                if (mr == MR && width == NR) {
                    at_b_tile<T, MR, NR>(ap + i0, lda, bp + j0, ldn, c + i0 * ldn + j0, ldn, rows);
                } else {
                    at_b_edge(ap + i0, lda, bp + j0, ldn, c + i0 * ldn + j0, ldn, mr, width, rows);
                }
            }
        }
    }
}

template <class T>
void transpose(const T* src, T* dst, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            dst[static_cast<std::size_t>(j) * rows + i] = src[static_cast<std::size_t>(i) * cols + j];
        }
    }
}

template <class T>
void add_row_vector_rows(T* c, const T* v, int row_begin, int row_end, int n) {
    for (int i = row_begin; i < row_end; ++i) {
        T* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            ci[j] += v[j];
        }
    }
}

template <class T>
void column_sum_cols(const T* x, T* out, int col_begin, int col_end, int m, int n) {
    for (int i = 0; i < m; ++i) {
        const T* xi = x + static_cast<std::size_t>(i) * n;
        for (int j = col_begin; j < col_end; ++j) {
            out[j] += xi[j];
        }
    }
}

template <class T>
void layernorm_forward_rows(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int row_begin,
                            int row_end, int n, T eps) {
    for (int i = row_begin; i < row_end; ++i) {
        const T* xi = x + static_cast<std::size_t>(i) * n;
        T* yi = y + static_cast<std::size_t>(i) * n;
        T mu = 0;
        for (int j = 0; j < n; ++j) {
            mu += xi[j];
        }
        mu /= static_cast<T>(n);
        T var = 0;
        for (int j = 0; j < n; ++j) {
            const T d = xi[j] - mu;
            var += d * d;
        }
        var /= static_cast<T>(n);
        const T rs = T(1) / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j) {
            yi[j] = (xi[j] - mu) * rs * gamma[j] + beta[j];
        }
        mean[i] = mu;
        rstd[i] = rs;
    }
}

template <class T>
void layernorm_backward_rows(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx,
                             int row_begin, int row_end, int n) {
    for (int i = row_begin; i < row_end; ++i) {
        const T* dyi = dy + static_cast<std::size_t>(i) * n;
        const T* xi = x + static_cast<std::size_t>(i) * n;
        T* dxi = dx + static_cast<std::size_t>(i) * n;
        const T mu = mean[i];
        const T rs = rstd[i];
        T mean_g = 0;
        T mean_gx = 0;
        for (int j = 0; j < n; ++j) {
            const T g = dyi[j] * gamma[j];
            mean_g += g;
            mean_gx += g * (xi[j] - mu) * rs;
        }
        mean_g /= static_cast<T>(n);
        mean_gx /= static_cast<T>(n);
        for (int j = 0; j < n; ++j) {
            const T xhat = (xi[j] - mu) * rs;
            dxi[j] += rs * (dyi[j] * gamma[j] - mean_g - xhat * mean_gx);
        }
    }
}

template <class T>
void layernorm_param_grad_cols(const T* dy, const T* x, const T* mean, const T* rstd, T* dgamma, T* dbeta,
                               int col_begin, int col_end, int m, int n) {
    for (int i = 0; i < m; ++i) {
        const T* dyi = dy + static_cast<std::size_t>(i) * n;
        const T* xi = x + static_cast<std::size_t>(i) * n;
        for (int j = col_begin; j < col_end; ++j) {
            dgamma[j] += dyi[j] * (xi[j] - mean[i]) * rstd[i];
            dbeta[j] += dyi[j];
        }
    }
}

// tanh approximation of GELU
template <class T>
void gelu_forward_range(const T* x, T* y, std::size_t begin, std::size_t end) {
    const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
    if constexpr (std::is_same_v<T, float>) {
        using L = Lanes<float>;
        // the tail is padded into a full vector so every element sees the same arithmetic
        for (std::size_t i = begin; i < end; i += L::kWidth) {
            const std::size_t n = std::min<std::size_t>(L::kWidth, end - i);
            alignas(64) float buf[L::kWidth] = {};
            std::memcpy(buf, x + i, n * sizeof(float));
            const L::Vector v = L::load(buf);
            const L::Vector out = 0.5F * v * (1.0F + tanh16(c * (v + 0.044715F * v * v * v)));
            L::store(buf, out);
            std::memcpy(y + i, buf, n * sizeof(float));
        }
    } else {
        for (std::size_t i = begin; i < end; ++i) {
            const T v = x[i];
            y[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + T(0.044715) * v * v * v)));
        }
    }
}

template <class T>
void gelu_backward_range(const T* x, const T* dy, T* dx, std::size_t begin, std::size_t end) {
    const T c = static_cast<T>(0.7978845608028654);
    if constexpr (std::is_same_v<T, float>) {
        using L = Lanes<float>;
        for (std::size_t i = begin; i < end; i += L::kWidth) {
            const std::size_t n = std::min<std::size_t>(L::kWidth, end - i);
            alignas(64) float bx[L::kWidth] = {};
            alignas(64) float bdy[L::kWidth] = {};
            alignas(64) float bdx[L::kWidth] = {};
            std::memcpy(bx, x + i, n * sizeof(float));
            std::memcpy(bdy, dy + i, n * sizeof(float));
            std::memcpy(bdx, dx + i, n * sizeof(float));
            const L::Vector v = L::load(bx);
            const L::Vector t = tanh16(c * (v + 0.044715F * v * v * v));
            const L::Vector dt = (1.0F - t * t) * c * (1.0F + 3.0F * 0.044715F * v * v);
            const L::Vector g = L::load(bdx) + L::load(bdy) * (0.5F * (1.0F + t) + 0.5F * v * dt);
            L::store(bdx, g);
            std::memcpy(dx + i, bdx, n * sizeof(float));
        }
    } else {
        for (std::size_t i = begin; i < end; ++i) {
            const T v = x[i];
            const T t = std::tanh(c * (v + T(0.044715) * v * v * v));
            const T dt = (T(1) - t * t) * c * (T(1) + T(3) * T(0.044715) * v * v);
            dx[i] += dy[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * dt);
        }
    }
}

template <class T>
void attention_forward_head(const T* qkv, T* out, T* probs, int b, int h, int seq, int heads, int dim) {
    const int hd = dim / heads;
    const std::size_t stride = static_cast<std::size_t>(3) * dim;
    const T* base = qkv + static_cast<std::size_t>(b) * seq * stride;
    const T* k = base + dim + h * hd;
    const T* v = base + 2 * dim + h * hd;
    T* p = probs + (static_cast<std::size_t>(b) * heads + h) * seq * seq;
    for (int t = 0; t < seq; ++t) {
        T* pt = p + static_cast<std::size_t>(t) * seq;
        attend_row(base + t * stride + h * hd, k, v, stride, t + 1, hd, pt,
                   out + (static_cast<std::size_t>(b) * seq + t) * dim + h * hd);
        std::fill(pt + t + 1, pt + seq, T(0));
    }
}

template <class T>
void attention_backward_head(const T* dout, const T* qkv, const T* probs, T* dqkv, int b, int h, int seq,
                             int heads, int dim, std::vector<T>& scratch) {
    const int hd = dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(hd));
    const std::size_t stride = static_cast<std::size_t>(3) * dim;
    const T* base = qkv + static_cast<std::size_t>(b) * seq * stride;
    T* dbase = dqkv + static_cast<std::size_t>(b) * seq * stride;
    const T* p = probs + (static_cast<std::size_t>(b) * heads + h) * seq * seq;
    scratch.resize(static_cast<std::size_t>(seq));
    T* ds = scratch.data();
    for (int t = 0; t < seq; ++t) {
        const T* pt = p + static_cast<std::size_t>(t) * seq;
        const T* dot_t = dout + (static_cast<std::size_t>(b) * seq + t) * dim + h * hd;
        const T* qt = base + t * stride + h * hd;
        T* dqt = dbase + t * stride + h * hd;
        T weighted = 0;
        for (int j = 0; j <= t; ++j) {
            ds[j] = dot(dot_t, base + j * stride + 2 * dim + h * hd, hd);
            weighted += pt[j] * ds[j];
        }
        for (int j = 0; j <= t; ++j) {
            const T g = pt[j] * (ds[j] - weighted) * scale;
            axpy(g, base + j * stride + dim + h * hd, dqt, hd);
            axpy(g, qt, dbase + j * stride + dim + h * hd, hd);
            axpy(pt[j], dot_t, dbase + j * stride + 2 * dim + h * hd, hd);
        }
    }
}

template <class T>
void softmax_row(const T* x, T* y, int n, T temperature) {
    T peak = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < n; ++j) {
        peak = std::max(peak, x[j] / temperature);
    }
    T total = 0;
    for (int j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] / temperature - peak);
        total += y[j];
    }
    const T inv = T(1) / total;
    for (int j = 0; j < n; ++j) {
        y[j] *= inv;
    }
}

}  // namespace detail

namespace serial {

template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    detail::matmul_rows(a, b, c, 0, m, k, n, accumulate);
}

template <class T>
void matmul_at_b(const T* a, const T* b, T* c, int r, int m, int n, bool accumulate) {
    detail::matmul_at_b_rows(a, b, c, 0, m, r, m, n, accumulate);
}

template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    std::vector<T> bt(static_cast<std::size_t>(k) * n);
    detail::transpose(b, bt.data(), n, k);
    detail::matmul_rows(a, bt.data(), c, 0, m, k, n, accumulate);
}

template <class T>
void add_row_vector(T* c, const T* v, int m, int n) {
    detail::add_row_vector_rows(c, v, 0, m, n);
}

template <class T>
void column_sum(const T* x, T* out, int m, int n) {
    detail::column_sum_cols(x, out, 0, n, m, n);
}

template <class T>
void layernorm_forward(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int m, int n, T eps) {
    detail::layernorm_forward_rows(x, gamma, beta, y, mean, rstd, 0, m, n, eps);
}

template <class T>
void layernorm_backward(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx, T* dgamma,
                        T* dbeta, int m, int n) {
    if (dx != nullptr) {
        detail::layernorm_backward_rows(dy, x, gamma, mean, rstd, dx, 0, m, n);
    }
    if (dgamma != nullptr) {
        detail::layernorm_param_grad_cols(dy, x, mean, rstd, dgamma, dbeta, 0, n, m, n);
    }
}

template <class T>
void gelu_forward(const T* x, T* y, std::size_t count) {
    detail::gelu_forward_range(x, y, 0, count);
}

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t count) {
    detail::gelu_backward_range(x, dy, dx, 0, count);
}

template <class T>
void attention_forward(const T* qkv, T* out, T* probs, int batch, int seq, int heads, int dim) {
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            detail::attention_forward_head(qkv, out, probs, b, h, seq, heads, dim);
        }
    }
}

template <class T>
void attention_backward(const T* dout, const T* qkv, const T* probs, T* dqkv, int batch, int seq, int heads, int dim) {
    std::vector<T> scratch;
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            detail::attention_backward_head(dout, qkv, probs, dqkv, b, h, seq, heads, dim, scratch);
        }
    }
}

template <class T>
void softmax_rows(const T* x, T* y, int m, int n, T temperature) {
    for (int i = 0; i < m; ++i) {
        detail::softmax_row(x + static_cast<std::size_t>(i) * n, y + static_cast<std::size_t>(i) * n, n, temperature);
    }
}

}  // namespace serial

#define MENTORKD_INSTANTIATE(T)                                                                                  \
    template void attend_row<T>(const T*, const T*, const T*, std::size_t, int, int, T*, T*);                    \
    namespace detail {                                                                                           \
    template void matmul_rows<T>(const T*, const T*, T*, int, int, int, int, bool);                              \
    template void matmul_at_b_rows<T>(const T*, const T*, T*, int, int, int, int, int, bool);                    \
    template void transpose<T>(const T*, T*, int, int);                                                          \
    template void add_row_vector_rows<T>(T*, const T*, int, int, int);                                           \
    template void column_sum_cols<T>(const T*, T*, int, int, int, int);                                          \
    template void layernorm_forward_rows<T>(const T*, const T*, const T*, T*, T*, T*, int, int, int, T);         \
    template void layernorm_backward_rows<T>(const T*, const T*, const T*, const T*, const T*, T*, int, int, int); \
    template void layernorm_param_grad_cols<T>(const T*, const T*, const T*, const T*, T*, T*, int, int, int, int); \
    template void gelu_forward_range<T>(const T*, T*, std::size_t, std::size_t);                                 \
    template void gelu_backward_range<T>(const T*, const T*, T*, std::size_t, std::size_t);                      \
    template void attention_forward_head<T>(const T*, T*, T*, int, int, int, int, int);                          \
    template void attention_backward_head<T>(const T*, const T*, const T*, T*, int, int, int, int, int,          \
                                             std::vector<T>&);                                                   \
    template void softmax_row<T>(const T*, T*, int, T);                                                          \
    }                                                                                                            \
    namespace serial {                                                                                           \
    template void matmul<T>(const T*, const T*, T*, int, int, int, bool);                                        \
    template void matmul_at_b<T>(const T*, const T*, T*, int, int, int, bool);                                   \
    template void matmul_a_bt<T>(const T*, const T*, T*, int, int, int, bool);                                   \
    template void add_row_vector<T>(T*, const T*, int, int);                                                     \
    template void column_sum<T>(const T*, T*, int, int);                                                         \
    template void layernorm_forward<T>(const T*, const T*, const T*, T*, T*, T*, int, int, T);                   \
    template void layernorm_backward<T>(const T*, const T*, const T*, const T*, const T*, T*, T*, T*, int, int); \
    template void gelu_forward<T>(const T*, T*, std::size_t);                                                    \
    template void gelu_backward<T>(const T*, const T*, T*, std::size_t);                                         \
    template void attention_forward<T>(const T*, T*, T*, int, int, int, int);                                    \
    template void attention_backward<T>(const T*, const T*, const T*, T*, int, int, int, int);                   \
    template void softmax_rows<T>(const T*, T*, int, int, T);                                                    \
    }

MENTORKD_INSTANTIATE(float)
MENTORKD_INSTANTIATE(double)

}  // namespace mentorkd::kernels
