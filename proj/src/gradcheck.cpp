#include "xgoal/gradcheck.hpp"

#include "xgoal/graphdata.hpp"
#include "xgoal/transform.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace xgoal {

std::unique_ptr<GradcheckInstance> make_gradcheck_instance(std::uint64_t seed, const GradcheckShape& shape) {
    if (shape.k.empty()) throw ContractViolation("gradcheck: need at least one layer");
    auto inst = std::make_unique<GradcheckInstance>();
    Rng rng(seed);
    const std::size_t v_count = shape.k.size();

    inst->x = DenseMatrix(shape.n, shape.d_x);
    for (double& v : inst->x.data) v = rng.normal();

    for (std::size_t v = 0; v < v_count; ++v) {
        std::vector<SparseMatrix::Triplet> t;
        for (std::size_t i = 0; i < shape.n; ++i)
            for (std::size_t j = i + 1; j < shape.n; ++j)
                if (rng.uniform() < 0.35) {
                    const double w = 0.5 + rng.uniform();
                    t.push_back({i, j, w});
                    t.push_back({j, i, w});
                }
        inst->adjacency.push_back(normalize_adjacency(SparseMatrix::from_triplets(shape.n, shape.n, std::move(t))));
    }

    for (std::size_t v = 0; v < v_count; ++v) {
        EncoderParams p = EncoderParams::init(shape.d_x, shape.d, rng);
        for (double& b : p.bias) b = rng.uniform(-0.3, 0.3);
        inst->params.push_back(std::move(p));
    }

    for (std::size_t v = 0; v < v_count; ++v) {
        LayerBatch b;
        b.a = &inst->adjacency[v];
        b.x = &inst->x;
        b.positive = positive_transform(inst->x, inst->adjacency[v], TransformConfig{0.5, seed}, rng);
        b.x_neg = negative_transform(inst->x, rng);
        inst->batches.push_back(std::move(b));
    }

    KMeansOptions kopts;
    kopts.tau = shape.tau;
    for (std::size_t v = 0; v < v_count; ++v) {
        const DenseMatrix h = forward(inst->params[v], inst->adjacency[v], inst->x);
        inst->models.push_back(kmeans(h, shape.k[v], rng, kopts));
    }
    return inst;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

namespace {

struct Slot {
    double* value;
    double analytic;
    std::string name;
};

std::vector<Slot> slots(std::vector<EncoderParams>& params, const std::vector<EncoderGrad>& grads) {
    std::vector<Slot> out;
    for (std::size_t v = 0; v < params.size(); ++v) {
        auto& p = params[v];
        const auto& g = grads[v];
        const std::string layer = "layer" + std::to_string(v) + ".";
        for (std::size_t i = 0; i < p.w.rows; ++i)
            for (std::size_t j = 0; j < p.w.cols; ++j) {
                const std::string ij = "[" + std::to_string(i) + "," + std::to_string(j) + "]";
                out.push_back({&p.w(i, j), g.gw(i, j), layer + "w" + ij});
                out.push_back({&p.w_self(i, j), g.gw_self(i, j), layer + "w_self" + ij});
            }
        for (std::size_t j = 0; j < p.bias.size(); ++j)
            out.push_back({&p.bias[j], g.gbias[j], layer + "bias[" + std::to_string(j) + "]"});
    }
    return out;
}

// Five-point central difference: (-f(+2h) + 8f(+h) - 8f(-h) + f(-2h)) / 12h.
double stencil(double* x, double h, const std::function<double()>& f) {
    const double x0 = *x;
    *x = x0 + 2 * h;
    const double fp2 = f();
    *x = x0 + h;
    const double fp1 = f();
    *x = x0 - h;
    const double fm1 = f();
    *x = x0 - 2 * h;
    const double fm2 = f();
    *x = x0;
    return (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h);
}

TermCheck compare(const std::string& term, std::vector<Slot>& s, const std::function<double()>& f, double tol) {
    TermCheck tc;
    tc.term = term;
    tc.entries = s.size();
    for (auto& slot : s) {
        const double num = stencil(slot.value, kGradcheckStep, f);
        const double err = relative_error(slot.analytic, num);
        if (tc.worst_entry.empty() || err > tc.max_rel_error) {
            tc.max_rel_error = err;
            tc.worst_entry = slot.name;
        }
    }
    tc.pass = tc.max_rel_error < tol;
    return tc;
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, std::optional<Term> fault, double tolerance) {
    auto inst = make_gradcheck_instance(seed);
    GradcheckReport rep;

    // Encoder backward against the scalar sum(U ⊙ H) for a fixed random U.
    {
        Rng rng(seed ^ 0xABCDEFULL);
        std::vector<EncoderParams> params = inst->params;
        std::vector<EncoderGrad> grads;
        std::vector<DenseMatrix> upstream;
        for (std::size_t v = 0; v < params.size(); ++v) {
            DenseMatrix u(inst->x.rows, params[v].out_dim());
            for (double& e : u.data) e = rng.normal();
            grads.push_back(backward(params[v], inst->adjacency[v], inst->x, u));
            upstream.push_back(std::move(u));
        }
        auto s = slots(params, grads);
        auto f = [&] {
            double total = 0.0;
            for (std::size_t v = 0; v < params.size(); ++v) {
                const DenseMatrix h = forward(params[v], inst->adjacency[v], inst->x);
                for (std::size_t i = 0; i < h.data.size(); ++i) total += upstream[v].data[i] * h.data[i];
            }
            return total;
        };
        rep.terms.push_back(compare("encoder", s, f, tolerance));
    }

    struct Isolated {
        const char* name;
        LossWeights w;
    };
    const Isolated cases[] = {
        {"L_N", {1.0, 0.0, 0.0, 0.0}},
        {"L_C", {0.0, 1.0, 0.0, 0.0}},
        {"R_N", {0.0, 0.0, 1.0, 0.0}},
        {"R_C", {0.0, 0.0, 0.0, 1.0}},
        {"L_X", {1.0, 1.0, 1.0, 1.0}},
    };
    ObjectiveOptions opts;
    opts.flip_gradient_sign = fault;
    for (const auto& c : cases) {
        std::vector<EncoderParams> params = inst->params;
        auto res = total_loss(params, inst->batches, inst->models, c.w, opts);
        auto s = slots(params, res.grads);
        // p_n^v is a constant of the objective, so it stays at the unperturbed point.
        ObjectiveOptions frozen;
        frozen.frozen_anchors = &res.h_clean;
        auto f = [&] { return total_loss(params, inst->batches, inst->models, c.w, frozen).report.total; };
        rep.terms.push_back(compare(c.name, s, f, tolerance));
    }

    rep.pass = std::all_of(rep.terms.begin(), rep.terms.end(), [](const TermCheck& t) { return t.pass; });
    return rep;
}

}  // namespace xgoal
