#include <omp.h>

#include <algorithm>
#include <vector>

#include "kernel_rows.hpp"
#include "mentorkd/kernels.hpp"

namespace mentorkd::kernels::parallel {

namespace {

// Splits [0, n) into one contiguous chunk per thread.
template <class Fn>
void for_chunks(int n, Fn&& fn) {
    if (n <= 0) {
        return;
    }
#pragma omp parallel
    {
        const int threads = omp_get_num_threads();
        const int id = omp_get_thread_num();
        const int begin = static_cast<int>(static_cast<long long>(n) * id / threads);
        const int end = static_cast<int>(static_cast<long long>(n) * (id + 1) / threads);
        if (begin < end) {
            fn(begin, end);
        }
    }
}

}  // namespace

template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    for_chunks(m, [&](int lo, int hi) { detail::matmul_rows(a, b, c, lo, hi, k, n, accumulate); });
}

template <class T>
void matmul_at_b(const T* a, const T* b, T* c, int r, int m, int n, bool accumulate) {
    for_chunks(m, [&](int lo, int hi) { detail::matmul_at_b_rows(a, b, c, lo, hi, r, m, n, accumulate); });
}

template <class T>
void matmul_a_bt(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate) {
    std::vector<T> bt(static_cast<std::size_t>(k) * n);
    detail::transpose(b, bt.data(), n, k);
    for_chunks(m, [&](int lo, int hi) { detail::matmul_rows(a, bt.data(), c, lo, hi, k, n, accumulate); });
}

template <class T>
void add_row_vector(T* c, const T* v, int m, int n) {
    for_chunks(m, [&](int lo, int hi) { detail::add_row_vector_rows(c, v, lo, hi, n); });
}

template <class T>
void column_sum(const T* x, T* out, int m, int n) {
    for_chunks(n, [&](int lo, int hi) { detail::column_sum_cols(x, out, lo, hi, m, n); });
}

template <class T>
void layernorm_forward(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int m, int n, T eps) {
    for_chunks(m, [&](int lo, int hi) { detail::layernorm_forward_rows(x, gamma, beta, y, mean, rstd, lo, hi, n, eps); });
}

template <class T>
void layernorm_backward(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx, T* dgamma,
                        T* dbeta, int m, int n) {
    if (dx != nullptr) {
        for_chunks(m, [&](int lo, int hi) { detail::layernorm_backward_rows(dy, x, gamma, mean, rstd, dx, lo, hi, n); });
    }
    if (dgamma != nullptr) {
        for_chunks(n, [&](int lo, int hi) {
            detail::layernorm_param_grad_cols(dy, x, mean, rstd, dgamma, dbeta, lo, hi, m, n);
        });
    }
}

template <class T>
void gelu_forward(const T* x, T* y, std::size_t count) {
    const int blocks = static_cast<int>((count + 1023) / 1024);
    for_chunks(blocks, [&](int lo, int hi) {
        detail::gelu_forward_range(x, y, static_cast<std::size_t>(lo) * 1024,
                                   std::min(count, static_cast<std::size_t>(hi) * 1024));
    });
}

template <class T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t count) {
    const int blocks = static_cast<int>((count + 1023) / 1024);
    for_chunks(blocks, [&](int lo, int hi) {
        detail::gelu_backward_range(x, dy, dx, static_cast<std::size_t>(lo) * 1024,
                                    std::min(count, static_cast<std::size_t>(hi) * 1024));
    });
}

template <class T>
void attention_forward(const T* qkv, T* out, T* probs, int batch, int seq, int heads, int dim) {
    for_chunks(batch * heads, [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            detail::attention_forward_head(qkv, out, probs, i / heads, i % heads, seq, heads, dim);
        }
    });
}

template <class T>
void attention_backward(const T* dout, const T* qkv, const T* probs, T* dqkv, int batch, int seq, int heads, int dim) {
    for_chunks(batch * heads, [&](int lo, int hi) {
        std::vector<T> scratch;
        for (int i = lo; i < hi; ++i) {
            detail::attention_backward_head(dout, qkv, probs, dqkv, i / heads, i % heads, seq, heads, dim, scratch);
        }
    });
}

template <class T>
void softmax_rows(const T* x, T* y, int m, int n, T temperature) {
    for_chunks(m, [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            detail::softmax_row(x + static_cast<std::size_t>(i) * n, y + static_cast<std::size_t>(i) * n, n,
                                temperature);
        }
    });
}

#define MENTORKD_INSTANTIATE(T)                                                                                  \
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
    template void softmax_rows<T>(const T*, T*, int, int, T);

MENTORKD_INSTANTIATE(float)
MENTORKD_INSTANTIATE(double)

}  // namespace mentorkd::kernels::parallel
