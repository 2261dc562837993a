#pragma once

#include "xgoal/numkit.hpp"

#include <utility>

namespace xgoal {

struct TransformConfig {
    double p_drop = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PositiveView {
    DenseMatrix x;
    SparseMatrix a;
};

// Inverted dropout over X entries and the stored values of the (normalized)
// adjacency. Sparsity structure is kept; dropped values are stored as 0.
PositiveView positive_transform(const DenseMatrix& x, const SparseMatrix& a, const TransformConfig& cfg, Rng& rng);

// Row shuffle of X by a uniform permutation drawn from rng.
DenseMatrix negative_transform(const DenseMatrix& x, Rng& rng);

// out.row(i) = x.row(perm[i])
DenseMatrix permute_rows(const DenseMatrix& x, const std::vector<std::size_t>& perm);

namespace detail {
// Unchecked dropout; p_drop = 0 keeps everything at scale 1.
PositiveView dropout_views(const DenseMatrix& x, const SparseMatrix& a, double p_drop, Rng& rng);
}  // namespace detail

}  // namespace xgoal
