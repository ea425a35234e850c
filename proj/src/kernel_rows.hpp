#pragma once

// Row/column-range building blocks shared by the serial and OpenMP kernels.

#include <cstddef>
#include <vector>

namespace mentorkd::kernels::detail {

template <class T>
void matmul_rows(const T* a, const T* b, T* c, int row_begin, int row_end, int k, int n, bool accumulate);
template <class T>
void matmul_at_b_rows(const T* a, const T* b, T* c, int row_begin, int row_end, int r, int m, int n,
                      bool accumulate);
template <class T>
void transpose(const T* src, T* dst, int rows, int cols);
template <class T>
void add_row_vector_rows(T* c, const T* v, int row_begin, int row_end, int n);
template <class T>
void column_sum_cols(const T* x, T* out, int col_begin, int col_end, int m, int n);
template <class T>
void layernorm_forward_rows(const T* x, const T* gamma, const T* beta, T* y, T* mean, T* rstd, int row_begin,
                            int row_end, int n, T eps);
template <class T>
void layernorm_backward_rows(const T* dy, const T* x, const T* gamma, const T* mean, const T* rstd, T* dx,
                             int row_begin, int row_end, int n);
template <class T>
void layernorm_param_grad_cols(const T* dy, const T* x, const T* mean, const T* rstd, T* dgamma, T* dbeta,
                               int col_begin, int col_end, int m, int n);
template <class T>
void gelu_forward_range(const T* x, T* y, std::size_t begin, std::size_t end);
template <class T>
void gelu_backward_range(const T* x, const T* dy, T* dx, std::size_t begin, std::size_t end);
template <class T>
void attention_forward_head(const T* qkv, T* out, T* probs, int b, int h, int seq, int heads, int dim);
template <class T>
void attention_backward_head(const T* dout, const T* qkv, const T* probs, T* dqkv, int b, int h, int seq,
                             int heads, int dim, std::vector<T>& scratch);
template <class T>
void softmax_row(const T* x, T* y, int n, T temperature);

}  // namespace mentorkd::kernels::detail
