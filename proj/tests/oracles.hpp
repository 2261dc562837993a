#pragma once

// Direct-summation reference implementations used only by tests. They follow
// the textbook formulas literally (long double, no stabilisation tricks, no
// shared helpers with the library) so they stay an independent route.

#include "xgoal/cluster.hpp"
#include "xgoal/numkit.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using xgoal::DenseMatrix;

inline long double cos_ld(const DenseMatrix& a, std::size_t i, const DenseMatrix& b, std::size_t j) {
    long double uv = 0, uu = 0, vv = 0;
    for (std::size_t c = 0; c < a.cols; ++c) {
        uv += static_cast<long double>(a(i, c)) * b(j, c);
        uu += static_cast<long double>(a(i, c)) * a(i, c);
        vv += static_cast<long double>(b(j, c)) * b(j, c);
    }
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

inline long double infonce_term(long double pos, long double neg) {
    return -std::log(std::exp(pos) / (std::exp(pos) + std::exp(neg)));
}

inline double node_loss(const DenseMatrix& h, const DenseMatrix& hp, const DenseMatrix& hn) {
    long double s = 0;
    for (std::size_t n = 0; n < h.rows; ++n) s += infonce_term(cos_ld(h, n, hp, n), cos_ld(h, n, hn, n));
    return static_cast<double>(s / h.rows);
}

inline std::vector<long double> prob(const DenseMatrix& h, std::size_t n, const xgoal::ClusterModel& m) {
    std::vector<long double> e(m.k());
    long double z = 0;
    for (std::size_t k = 0; k < m.k(); ++k) {
        long double d = 0;
        for (std::size_t c = 0; c < h.cols; ++c) d += static_cast<long double>(m.centers(k, c)) * h(n, c);
        e[k] = std::exp(d / m.tau);
        z += e[k];
    }
    for (auto& v : e) v /= z;
    return e;
}

inline double cluster_loss(const DenseMatrix& h, const xgoal::ClusterModel& m) {
    long double s = 0;
    for (std::size_t n = 0; n < h.rows; ++n) s -= std::log(prob(h, n, m)[m.assignments[n]]);
    return static_cast<double>(s / h.rows);
}

inline double align_node(const std::vector<DenseMatrix>& h, const std::vector<DenseMatrix>& hn) {
    const std::size_t v_count = h.size(), n_count = h[0].rows;
    if (v_count < 2) return 0.0;
    long double s = 0;
    for (std::size_t n = 0; n < n_count; ++n)
        for (std::size_t v = 0; v < v_count; ++v)
            for (std::size_t w = 0; w < v_count; ++w)
                if (w != v) s += infonce_term(cos_ld(h[v], n, h[w], n), cos_ld(h[v], n, hn[v], n));
    return static_cast<double>(s / (n_count * v_count * (v_count - 1)));
}

inline double align_cluster(const std::vector<DenseMatrix>& h, const std::vector<xgoal::ClusterModel>& models) {
    const std::size_t v_count = h.size(), n_count = h[0].rows;
    if (v_count < 2) return 0.0;
    long double total = 0;
    for (std::size_t v = 0; v < v_count; ++v) {
        long double rv = 0;
        for (std::size_t n = 0; n < n_count; ++n) {
            const auto p = prob(h[v], n, models[v]);
            for (std::size_t w = 0; w < v_count; ++w) {
                if (w == v) continue;
                const auto q = prob(h[w], n, models[v]);
                for (std::size_t k = 0; k < p.size(); ++k)
                    if (p[k] > 0) rv += p[k] * std::log(p[k] / q[k]);
            }
        }
        total += rv / (n_count * (v_count - 1));
    }
    return static_cast<double>(total / v_count);
}

inline DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            long double s = 0;
            for (std::size_t k = 0; k < a.cols; ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
            c(i, j) = static_cast<double>(s);
        }
    return c;
}

// H = tanh(A X W + X W' + b) with explicit loops over the dense adjacency.
inline DenseMatrix encoder_forward(const DenseMatrix& a, const DenseMatrix& x, const DenseMatrix& w,
                                   const DenseMatrix& ws, const std::vector<double>& b) {
    DenseMatrix h(x.rows, w.cols);
    for (std::size_t n = 0; n < x.rows; ++n)
        for (std::size_t j = 0; j < w.cols; ++j) {
            long double s = b[j];
            for (std::size_t f = 0; f < x.cols; ++f) {
                long double ax = 0;
                for (std::size_t m = 0; m < x.rows; ++m) ax += static_cast<long double>(a(n, m)) * x(m, f);
                s += ax * w(f, j) + static_cast<long double>(x(n, f)) * ws(f, j);
            }
            h(n, j) = static_cast<double>(std::tanh(s));
        }
    return h;
}

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, xgoal::Rng& rng, double scale = 1.0) {
    DenseMatrix m(r, c);
    for (double& v : m.data) v = scale * rng.normal();
    return m;
}

inline xgoal::SparseMatrix random_sparse(std::size_t r, std::size_t c, double density, xgoal::Rng& rng) {
    std::vector<xgoal::SparseMatrix::Triplet> t;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            if (rng.uniform() < density) t.push_back({i, j, rng.normal()});
    return xgoal::SparseMatrix::from_triplets(r, c, std::move(t));
}

inline xgoal::SparseMatrix random_symmetric(std::size_t n, double density, xgoal::Rng& rng) {
    std::vector<xgoal::SparseMatrix::Triplet> t;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < density) {
                const double w = 0.1 + rng.uniform();
                t.push_back({i, j, w});
                t.push_back({j, i, w});
            }
    return xgoal::SparseMatrix::from_triplets(n, n, std::move(t));
}

inline xgoal::ClusterModel random_model(std::size_t n, std::size_t k, std::size_t d, xgoal::Rng& rng, double tau = 0.2) {
    xgoal::ClusterModel m;
    m.centers = random_matrix(k, d, rng, 0.5);
    m.tau = tau;
    for (std::size_t i = 0; i < n; ++i) m.assignments.push_back(static_cast<std::size_t>(rng.uniform_int(k)));
    return m;
}

}  // namespace oracle
