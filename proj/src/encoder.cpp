#include "xgoal/encoder.hpp"

#include <cmath>

namespace xgoal {

EncoderParams EncoderParams::init(std::size_t d_x, std::size_t d, Rng& rng) {
    EncoderParams p = zeros(d_x, d);
    const double s = std::sqrt(6.0 / static_cast<double>(d_x + d));
    for (double& v : p.w.data) v = rng.uniform(-s, s);
    for (double& v : p.w_self.data) v = rng.uniform(-s, s);
    return p;
}

EncoderParams EncoderParams::zeros(std::size_t d_x, std::size_t d) {
    return EncoderParams{DenseMatrix(d_x, d), DenseMatrix(d_x, d), std::vector<double>(d, 0.0)};
}

void EncoderParams::validate() const {
    if (!w.same_shape(w_self) || bias.size() != w.cols) throw ContractViolation("EncoderParams: inconsistent shapes");
}

EncoderGrad EncoderGrad::zeros_like(const EncoderParams& p) {
    return EncoderGrad{DenseMatrix(p.w.rows, p.w.cols), DenseMatrix(p.w_self.rows, p.w_self.cols),
                       std::vector<double>(p.bias.size(), 0.0)};
}

EncoderGrad& EncoderGrad::operator+=(const EncoderGrad& o) {
    for (std::size_t i = 0; i < gw.data.size(); ++i) gw.data[i] += o.gw.data[i];
    for (std::size_t i = 0; i < gw_self.data.size(); ++i) gw_self.data[i] += o.gw_self.data[i];
    for (std::size_t i = 0; i < gbias.size(); ++i) gbias[i] += o.gbias[i];
    return *this;
}

namespace {

void check_shapes(const EncoderParams& p, const SparseMatrix& a, const DenseMatrix& x) {
    p.validate();
    if (a.rows != x.rows || a.cols != x.rows) throw ContractViolation("encoder: adjacency must be N x N with N = rows(X)");
    if (x.cols != p.in_dim()) throw ContractViolation("encoder: attribute width != d_x");
}

}  // namespace

EncoderCache forward_cached(const EncoderParams& params, const SparseMatrix& a_norm, const DenseMatrix& x) {
    check_shapes(params, a_norm, x);
    EncoderCache c;
    c.ax = spmm(a_norm, x);
    c.h = matmul(c.ax, params.w);
    const DenseMatrix self = matmul(x, params.w_self);
    for (std::size_t i = 0; i < c.h.rows; ++i)
        for (std::size_t j = 0; j < c.h.cols; ++j) c.h(i, j) = std::tanh(c.h(i, j) + self(i, j) + params.bias[j]);
    return c;
}

DenseMatrix forward(const EncoderParams& params, const SparseMatrix& a_norm, const DenseMatrix& x) {
    return forward_cached(params, a_norm, x).h;
}

EncoderGrad backward(const EncoderParams& params, const EncoderCache& cache, const DenseMatrix& x,
                     const DenseMatrix& upstream) {
    if (!upstream.same_shape(cache.h)) throw ContractViolation("encoder backward: upstream shape != H shape");
    if (x.rows != cache.h.rows || x.cols != params.in_dim()) throw ContractViolation("encoder backward: X shape mismatch");
    DenseMatrix pre(upstream.rows, upstream.cols);
    for (std::size_t k = 0; k < pre.data.size(); ++k) {
        const double h = cache.h.data[k];
        pre.data[k] = upstream.data[k] * (1.0 - h * h);
    }
    EncoderGrad g;
    g.gw = matmul_tn(cache.ax, pre);
    g.gw_self = matmul_tn(x, pre);
    g.gbias.assign(pre.cols, 0.0);
    for (std::size_t i = 0; i < pre.rows; ++i)
        for (std::size_t j = 0; j < pre.cols; ++j) g.gbias[j] += pre(i, j);
    return g;
}

EncoderGrad backward(const EncoderParams& params, const SparseMatrix& a_norm, const DenseMatrix& x,
                     const DenseMatrix& upstream) {
    return backward(params, forward_cached(params, a_norm, x), x, upstream);
}

}  // namespace xgoal
