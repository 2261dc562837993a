#include "xgoal/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xgoal {

void ClusterModel::validate() const {
    if (!(tau > 0.0)) throw ContractViolation("ClusterModel: tau must be positive");
    if (centers.rows < 1) throw ContractViolation("ClusterModel: need at least one center");
    for (std::size_t a : assignments)
        if (a >= centers.rows) throw ContractViolation("ClusterModel: assignment out of range");
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

std::size_t nearest(std::span<const double> x, const DenseMatrix& centers, double* dist = nullptr) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows; ++c) {
        const double d = sq_dist(x, centers.row(c));
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    if (dist) *dist = bd;
    return best;
}

std::vector<std::size_t> assign_all(const DenseMatrix& h, const DenseMatrix& centers) {
    std::vector<std::size_t> a(h.rows);
    for (std::size_t i = 0; i < h.rows; ++i) a[i] = nearest(h.row(i), centers);
    return a;
}

DenseMatrix means(const DenseMatrix& h, const std::vector<std::size_t>& assign, std::size_t k,
                  std::vector<std::size_t>& counts) {
    DenseMatrix c(k, h.cols);
    counts.assign(k, 0);
    for (std::size_t i = 0; i < h.rows; ++i) {
        auto row = c.row(assign[i]);
        auto src = h.row(i);
        for (std::size_t j = 0; j < h.cols; ++j) row[j] += src[j];
        ++counts[assign[i]];
    }
    for (std::size_t q = 0; q < k; ++q)
        if (counts[q] > 0)
            for (double& v : c.row(q)) v /= static_cast<double>(counts[q]);
    return c;
}

// Fills each empty cluster with the point farthest from its own center,
// taken from a cluster that keeps at least one member.
DenseMatrix update_centers(const DenseMatrix& h, std::vector<std::size_t>& assign, std::size_t k) {
    std::vector<std::size_t> counts;
    DenseMatrix c = means(h, assign, k, counts);
    for (std::size_t q = 0; q < k; ++q) {
        if (counts[q] > 0) continue;
        std::size_t far = h.rows;
        double fd = -1.0;
        for (std::size_t i = 0; i < h.rows; ++i) {
            if (counts[assign[i]] < 2) continue;
            const double d = sq_dist(h.row(i), c.row(assign[i]));
            if (d > fd) {
                fd = d;
                far = i;
            }
        }
        if (far == h.rows) break;  // k > distinct-capable points; cannot happen when k <= N
        --counts[assign[far]];
        assign[far] = q;
        counts[q] = 1;
        c = means(h, assign, k, counts);
    }
    return c;
}

double inertia_of(const DenseMatrix& h, const DenseMatrix& centers, const std::vector<std::size_t>& assign) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.rows; ++i) s += sq_dist(h.row(i), centers.row(assign[i]));
    return s;
}

}  // namespace

DenseMatrix kmeans_pp_init(const DenseMatrix& h, std::size_t k, Rng& rng) {
    DenseMatrix centers(k, h.cols);
    std::vector<double> d2(h.rows, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(rng.uniform_int(h.rows));
    for (std::size_t c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (double v : d2) total += v;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                pick = h.rows - 1;
                for (std::size_t i = 0; i < h.rows; ++i) {
                    acc += d2[i];
                    if (acc > target && d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.uniform_int(h.rows));
            }
        }
        auto src = h.row(pick);
        std::copy(src.begin(), src.end(), centers.row(c).begin());
        for (std::size_t i = 0; i < h.rows; ++i) d2[i] = std::min(d2[i], sq_dist(h.row(i), centers.row(c)));
    }
    return centers;
}

ClusterModel lloyd(const DenseMatrix& h, DenseMatrix centers, std::size_t max_iter, std::vector<double>* trace) {
    const std::size_t k = centers.rows;
    auto assign = assign_all(h, centers);
    for (std::size_t it = 0; it < max_iter; ++it) {
        centers = update_centers(h, assign, k);
        if (trace) trace->push_back(inertia_of(h, centers, assign));
        auto next = assign_all(h, centers);
        if (next == assign) break;
        assign = std::move(next);
    }
    centers = update_centers(h, assign, k);
    ClusterModel m;
    m.inertia = inertia_of(h, centers, assign);
    m.centers = std::move(centers);
    m.assignments = std::move(assign);
    return m;
}

ClusterModel kmeans(const DenseMatrix& h, std::size_t k, Rng& rng, const KMeansOptions& opts) {
    if (h.rows < 1) throw ContractViolation("kmeans: need at least one point");
    if (k < 1 || k > h.rows) throw ContractViolation("kmeans: need 1 <= k <= N");
    if (!(opts.tau > 0.0)) throw ContractViolation("kmeans: tau must be positive");
    ClusterModel best;
    bool have = false;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, opts.restarts); ++r) {
        ClusterModel m = lloyd(h, kmeans_pp_init(h, k, rng), opts.max_iter);
        if (!have || m.inertia < best.inertia) {
            best = std::move(m);
            have = true;
        }
    }
    best.tau = opts.tau;
    return best;
}

std::vector<double> assign_log_distribution(std::span<const double> h_row, const ClusterModel& model) {
    if (h_row.size() != model.centers.cols) throw ContractViolation("assign_distribution: dimension mismatch");
    std::vector<double> z(model.k());
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = dot(model.centers.row(c), h_row) / model.tau;
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (double& v : z) v -= lse;
    return z;
}

std::vector<double> assign_distribution(std::span<const double> h_row, const ClusterModel& model) {
    if (h_row.size() != model.centers.cols) throw ContractViolation("assign_distribution: dimension mismatch");
    std::vector<double> z(model.k());
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = dot(model.centers.row(c), h_row) / model.tau;
    softmax_inplace(z);
    return z;
}

}  // namespace xgoal
