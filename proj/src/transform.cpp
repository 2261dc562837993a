#include "xgoal/transform.hpp"

namespace xgoal {

void TransformConfig::validate() const {
    if (!(p_drop > 0.0 && p_drop < 1.0)) throw ContractViolation("p_drop must lie in (0, 1)");
}

namespace detail {

PositiveView dropout_views(const DenseMatrix& x, const SparseMatrix& a, double p_drop, Rng& rng) {
    const double scale = 1.0 / (1.0 - p_drop);
    PositiveView view{x, a};
    for (double& v : view.x.data) v = rng.uniform() < p_drop ? 0.0 : v * scale;
    for (double& v : view.a.values) v = rng.uniform() < p_drop ? 0.0 : v * scale;
    return view;
}

}  // namespace detail

PositiveView positive_transform(const DenseMatrix& x, const SparseMatrix& a, const TransformConfig& cfg, Rng& rng) {
    cfg.validate();
    return detail::dropout_views(x, a, cfg.p_drop, rng);
}

DenseMatrix permute_rows(const DenseMatrix& x, const std::vector<std::size_t>& perm) {
    if (perm.size() != x.rows) throw ContractViolation("permute_rows: permutation length != rows");
    DenseMatrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        if (perm[i] >= x.rows) throw ContractViolation("permute_rows: index out of range");
        auto src = x.row(perm[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

DenseMatrix negative_transform(const DenseMatrix& x, Rng& rng) {
    if (x.rows < 2) throw ContractViolation("negative_transform: need at least 2 rows");
    return permute_rows(x, rng.permutation(x.rows));
}

}  // namespace xgoal
