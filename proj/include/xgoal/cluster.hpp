#pragma once

#include "xgoal/numkit.hpp"

#include <vector>

namespace xgoal {

struct ClusterModel {
    DenseMatrix centers;  // K x d
    std::vector<std::size_t> assignments;
    double tau = 0.2;
    double inertia = 0.0;

    std::size_t k() const { return centers.rows; }
    void validate() const;
    bool operator==(const ClusterModel&) const = default;
};

struct KMeansOptions {
    std::size_t max_iter = 300;
    std::size_t restarts = 3;
    double tau = 0.2;
};

// Lloyd iterations with k-means++ seeding, best restart by inertia.
ClusterModel kmeans(const DenseMatrix& h, std::size_t k, Rng& rng, const KMeansOptions& opts = {});

// One Lloyd run from the given initial centers. When trace is non-null it
// receives the inertia after every center update.
ClusterModel lloyd(const DenseMatrix& h, DenseMatrix centers, std::size_t max_iter, std::vector<double>* trace = nullptr);

DenseMatrix kmeans_pp_init(const DenseMatrix& h, std::size_t k, Rng& rng);

// p(k|h) = softmax_k(c_k·h / tau)
std::vector<double> assign_distribution(std::span<const double> h_row, const ClusterModel& model);
// Log of the same distribution, computed without underflow.
std::vector<double> assign_log_distribution(std::span<const double> h_row, const ClusterModel& model);

}  // namespace xgoal
