#pragma once

#include "xgoal/numkit.hpp"

#include <vector>

namespace xgoal {

// One-layer first-order GCN: H = tanh(A X W + X W' + b).
struct EncoderParams {
    DenseMatrix w;       // d_x x d
    DenseMatrix w_self;  // d_x x d
    std::vector<double> bias;

    std::size_t in_dim() const { return w.rows; }
    std::size_t out_dim() const { return w.cols; }

    // W, W' ~ U(-s, s), s = sqrt(6 / (d_x + d)); b = 0.
    static EncoderParams init(std::size_t d_x, std::size_t d, Rng& rng);
    static EncoderParams zeros(std::size_t d_x, std::size_t d);

    void validate() const;
    bool operator==(const EncoderParams&) const = default;
};

struct EncoderGrad {
    DenseMatrix gw;
    DenseMatrix gw_self;
    std::vector<double> gbias;

    static EncoderGrad zeros_like(const EncoderParams& p);
    EncoderGrad& operator+=(const EncoderGrad& o);
};

// Keeps A·X and H from the forward pass so backward does not redo the sparse product.
struct EncoderCache {
    DenseMatrix ax;
    DenseMatrix h;
};

EncoderCache forward_cached(const EncoderParams& params, const SparseMatrix& a_norm, const DenseMatrix& x);
DenseMatrix forward(const EncoderParams& params, const SparseMatrix& a_norm, const DenseMatrix& x);

EncoderGrad backward(const EncoderParams& params, const EncoderCache& cache, const DenseMatrix& x,
                     const DenseMatrix& upstream);
EncoderGrad backward(const EncoderParams& params, const SparseMatrix& a_norm, const DenseMatrix& x,
                     const DenseMatrix& upstream);

}  // namespace xgoal
