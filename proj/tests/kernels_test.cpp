#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mentorkd/kernels.hpp"
#include "mentorkd/rng.hpp"

using namespace mentorkd;
namespace k = mentorkd::kernels;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.normal());
    return v;
}

template <class T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

// softmax rows of a causal-attention probability table, rows of length seq
template <class T>
std::vector<T> causal_probs(int batch, int heads, int seq, std::uint64_t seed) {
    auto p = random_vec<T>(static_cast<std::size_t>(batch) * heads * seq * seq, seed);
    for (int r = 0; r < batch * heads * seq; ++r) {
        const int t = r % seq;
        T* row = p.data() + static_cast<std::size_t>(r) * seq;
        T s = 0;
        for (int j = 0; j <= t; ++j) s += row[j] = std::exp(row[j]);
        for (int j = 0; j <= t; ++j) row[j] /= s;
        for (int j = t + 1; j < seq; ++j) row[j] = 0;
    }
    return p;
}

}  // namespace

TEST_CASE_TEMPLATE("matmul variants agree with a naive triple loop", T, float, double) {
    const int m = 37, kk = 29, n = 41;
    const auto a = random_vec<T>(m * kk, 1), b = random_vec<T>(kk * n, 2);
    std::vector<double> ref(m * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            for (int p = 0; p < kk; ++p) ref[i * n + j] += double(a[i * kk + p]) * double(b[p * n + j]);
    const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-12;

    std::vector<T> c(m * n);
    k::serial::matmul(a.data(), b.data(), c.data(), m, kk, n, false);
    for (int i = 0; i < m * n; ++i) CHECK(std::abs(c[i] - ref[i]) < tol);

    // A^T B with A stored [kk, m]
    std::vector<T> at(kk * m);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < kk; ++p) at[p * m + i] = a[i * kk + p];
    k::serial::matmul_at_b(at.data(), b.data(), c.data(), kk, m, n, false);
    for (int i = 0; i < m * n; ++i) CHECK(std::abs(c[i] - ref[i]) < tol);

    // A B^T with B stored [n, kk]
    std::vector<T> bt(n * kk);
    for (int p = 0; p < kk; ++p)
        for (int j = 0; j < n; ++j) bt[j * kk + p] = b[p * n + j];
    k::serial::matmul_a_bt(a.data(), bt.data(), c.data(), m, kk, n, false);
    for (int i = 0; i < m * n; ++i) CHECK(std::abs(c[i] - ref[i]) < tol);

    // accumulate adds on top
    k::serial::matmul(a.data(), b.data(), c.data(), m, kk, n, true);
    for (int i = 0; i < m * n; ++i) CHECK(std::abs(c[i] - 2 * ref[i]) < 2 * tol);
}

TEST_CASE_TEMPLATE("serial and parallel kernels are bitwise identical", T, float, double) {
    const int m = 53, kk = 64, n = 47;
    const auto a = random_vec<T>(m * kk, 3), b = random_vec<T>(kk * n, 4), bt = random_vec<T>(n * kk, 5);
    const auto ar = random_vec<T>(m * n, 6);

    auto both = [](auto&& fn, std::size_t size, bool seed_output = false) {
        std::vector<T> s(size, T(0)), p(size, T(0));
        if (seed_output) {
            s = random_vec<T>(size, 99);
            p = s;
        }
        fn(true, s);
        fn(false, p);
        return bitwise_equal(s, p);
    };

    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::matmul(a.data(), b.data(), c.data(), m, kk, n, true)
            : k::parallel::matmul(a.data(), b.data(), c.data(), m, kk, n, true);
    }, m * n, true));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::matmul_at_b(a.data(), ar.data(), c.data(), m, kk, n, false)
            : k::parallel::matmul_at_b(a.data(), ar.data(), c.data(), m, kk, n, false);
    }, kk * n));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::matmul_a_bt(a.data(), bt.data(), c.data(), m, kk, n, false)
            : k::parallel::matmul_a_bt(a.data(), bt.data(), c.data(), m, kk, n, false);
    }, m * n));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::column_sum(ar.data(), c.data(), m, n) : k::parallel::column_sum(ar.data(), c.data(), m, n);
    }, n, true));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        c = ar;
        ser ? k::serial::add_row_vector(c.data(), b.data(), m, n) : k::parallel::add_row_vector(c.data(), b.data(), m, n);
    }, m * n));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::gelu_forward(ar.data(), c.data(), c.size()) : k::parallel::gelu_forward(ar.data(), c.data(), c.size());
    }, m * n));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::gelu_backward(ar.data(), a.data(), c.data(), c.size())
            : k::parallel::gelu_backward(ar.data(), a.data(), c.data(), c.size());
    }, m * n, true));
    CHECK(both([&](bool ser, std::vector<T>& c) {
        ser ? k::serial::softmax_rows(ar.data(), c.data(), m, n, T(2))
            : k::parallel::softmax_rows(ar.data(), c.data(), m, n, T(2));
    }, m * n));

    // layernorm forward/backward
    const auto gamma = random_vec<T>(n, 7), beta = random_vec<T>(n, 8);
    CHECK(both([&](bool ser, std::vector<T>& out) {
        T* y = out.data();
        T* mean = y + m * n;
        T* rstd = mean + m;
        ser ? k::serial::layernorm_forward(ar.data(), gamma.data(), beta.data(), y, mean, rstd, m, n, T(1e-5))
            : k::parallel::layernorm_forward(ar.data(), gamma.data(), beta.data(), y, mean, rstd, m, n, T(1e-5));
    }, m * n + 2 * m));
    std::vector<T> y(m * n), mean(m), rstd(m);
    k::serial::layernorm_forward(ar.data(), gamma.data(), beta.data(), y.data(), mean.data(), rstd.data(), m, n, T(1e-5));
    const auto dy = random_vec<T>(m * n, 9);
    CHECK(both([&](bool ser, std::vector<T>& out) {
        T* dx = out.data();
        T* dg = dx + m * n;
        T* db = dg + n;
        ser ? k::serial::layernorm_backward(dy.data(), ar.data(), gamma.data(), mean.data(), rstd.data(), dx, dg, db, m, n)
            : k::parallel::layernorm_backward(dy.data(), ar.data(), gamma.data(), mean.data(), rstd.data(), dx, dg, db, m, n);
    }, m * n + 2 * n));

    // attention forward/backward
    const int batch = 3, seq = 11, heads = 4, dim = 32;
    const auto qkv = random_vec<T>(batch * seq * 3 * dim, 10);
    CHECK(both([&](bool ser, std::vector<T>& out) {
        T* o = out.data();
        T* probs = o + batch * seq * dim;
        ser ? k::serial::attention_forward(qkv.data(), o, probs, batch, seq, heads, dim)
            : k::parallel::attention_forward(qkv.data(), o, probs, batch, seq, heads, dim);
    }, batch * seq * dim + batch * heads * seq * seq));
    const auto probs = causal_probs<T>(batch, heads, seq, 11);
    const auto dout = random_vec<T>(batch * seq * dim, 12);
    CHECK(both([&](bool ser, std::vector<T>& dqkv) {
        ser ? k::serial::attention_backward(dout.data(), qkv.data(), probs.data(), dqkv.data(), batch, seq, heads, dim)
            : k::parallel::attention_backward(dout.data(), qkv.data(), probs.data(), dqkv.data(), batch, seq, heads, dim);
    }, batch * seq * 3 * dim));
}

TEST_CASE("attention forward matches a direct computation and stays causal") {
    const int batch = 2, seq = 7, heads = 2, dim = 8, hd = dim / heads;
    const auto qkv = random_vec<double>(batch * seq * 3 * dim, 21);
    std::vector<double> out(batch * seq * dim), probs(batch * heads * seq * seq);
    k::serial::attention_forward(qkv.data(), out.data(), probs.data(), batch, seq, heads, dim);
    const double scale = 1.0 / std::sqrt(double(hd));
    for (int b = 0; b < batch; ++b)
        for (int h = 0; h < heads; ++h)
            for (int t = 0; t < seq; ++t) {
                std::vector<double> w(t + 1);
                double mx = -1e300, s = 0;
                for (int j = 0; j <= t; ++j) {
                    double d = 0;
                    for (int e = 0; e < hd; ++e)
                        d += qkv[(b * seq + t) * 3 * dim + h * hd + e] * qkv[(b * seq + j) * 3 * dim + dim + h * hd + e];
                    w[j] = d * scale;
                    mx = std::max(mx, w[j]);
                }
                for (auto& x : w) s += x = std::exp(x - mx);
                for (int e = 0; e < hd; ++e) {
                    double o = 0;
                    for (int j = 0; j <= t; ++j) o += w[j] / s * qkv[(b * seq + j) * 3 * dim + 2 * dim + h * hd + e];
                    CHECK(out[(b * seq + t) * dim + h * hd + e] == doctest::Approx(o).epsilon(1e-12));
                }
                const double* prow = probs.data() + ((b * heads + h) * seq + t) * seq;
                for (int j = t + 1; j < seq; ++j) CHECK(prow[j] == 0.0);
            }
}

TEST_CASE("fast float gelu tracks the double reference") {
    std::vector<float> x;
    for (int i = -4000; i <= 4000; ++i) x.push_back(i * 0.003f);
    x.push_back(50.0f);
    x.push_back(-50.0f);
    std::vector<float> yf(x.size());
    std::vector<double> xd(x.begin(), x.end()), yd(x.size());
    k::serial::gelu_forward(x.data(), yf.data(), x.size());
    k::serial::gelu_forward(xd.data(), yd.data(), xd.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(yf[i] - yd[i]) <= 2e-6 * std::max(1.0, std::abs(yd[i])));
    }
    std::vector<float> ones(x.size(), 1.0f), gf(x.size(), 0.0f);
    std::vector<double> onesd(x.size(), 1.0), gd(x.size(), 0.0);
    k::serial::gelu_backward(x.data(), ones.data(), gf.data(), x.size());
    k::serial::gelu_backward(xd.data(), onesd.data(), gd.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(gf[i] - gd[i]) <= 1e-5);
}

TEST_CASE("softmax rows sum to one and respect temperature") {
    const int m = 64, n = 29;
    const auto x = random_vec<double>(m * n, 31);
    std::vector<double> p1(m * n), p2(m * n);
    k::serial::softmax_rows(x.data(), p1.data(), m, n, 1.0);
    k::serial::softmax_rows(x.data(), p2.data(), m, n, 2.0);
    for (int r = 0; r < m; ++r) {
        double s1 = 0, s2 = 0, h1 = 0, h2 = 0;
        for (int j = 0; j < n; ++j) {
            s1 += p1[r * n + j];
            s2 += p2[r * n + j];
            h1 -= p1[r * n + j] * std::log(p1[r * n + j]);
            h2 -= p2[r * n + j] * std::log(p2[r * n + j]);
        }
        CHECK(std::abs(s1 - 1) < 1e-12);
        CHECK(std::abs(s2 - 1) < 1e-12);
        CHECK(h2 >= h1 - 1e-12);
    }
}

TEST_CASE("backend switch dispatches to the selected implementation") {
    const auto before = k::backend();
    k::set_backend(k::Backend::Serial);
    CHECK(k::backend() == k::Backend::Serial);
    const auto a = random_vec<float>(16 * 16, 41);
    std::vector<float> c1(256), c2(256);
    k::matmul(a.data(), a.data(), c1.data(), 16, 16, 16, false);
    k::set_backend(k::Backend::Parallel);
    k::matmul(a.data(), a.data(), c2.data(), 16, 16, 16, false);
    CHECK(bitwise_equal(c1, c2));
    k::set_backend(before);
}
