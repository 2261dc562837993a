#include "xgoal/objective.hpp"

#include "xgoal/parallel.hpp"

#include <cmath>

namespace xgoal {

void LossWeights::validate() const {
    if (!(lambda_n >= 0.0 && lambda_c >= 0.0 && mu_n >= 0.0 && mu_c >= 0.0))
        throw ContractViolation("loss weights must be nonnegative");
}

std::string_view term_name(Term t) {
    switch (t) {
        case Term::node: return "node";
        case Term::cluster: return "cluster";
        case Term::align_node: return "align_node";
        case Term::align_cluster: return "align_cluster";
    }
    return "?";
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Adds scale * d cos(u, v)/du to gu and scale * d cos(u, v)/dv to gv.
void add_cosine_grad(std::span<const double> u, std::span<const double> v, double scale, std::span<double> gu,
                     std::span<double> gv) {
    const double nu_raw = norm2(u);
    const double nv_raw = norm2(v);
    const double nu = std::max(nu_raw, kFloor);
    const double nv = std::max(nv_raw, kFloor);
    const double c = dot(u, v) / (nu * nv);
    const double inv = 1.0 / (nu * nv);
    // A floored norm is treated as a constant.
    const double cu = nu_raw > kFloor ? c / (nu * nu) : 0.0;
    const double cv = nv_raw > kFloor ? c / (nv * nv) : 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        gu[i] += scale * (v[i] * inv - cu * u[i]);
        gv[i] += scale * (u[i] * inv - cv * v[i]);
    }
}

void require_same(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (!a.same_shape(b)) throw ContractViolation(std::string(what) + ": shape mismatch");
}

void scale_into(DenseMatrix& dst, const DenseMatrix& src, double s) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += s * src.data[i];
}

}  // namespace

NodeLossResult node_loss(const DenseMatrix& h, const DenseMatrix& h_pos, const DenseMatrix& h_neg) {
    require_same(h, h_pos, "node_loss");
    require_same(h, h_neg, "node_loss");
    if (h.rows == 0) throw ContractViolation("node_loss: empty embedding matrix");
    const std::size_t n = h.rows;
    const double inv_n = 1.0 / static_cast<double>(n);
    NodeLossResult r;
    r.per_node.resize(n);
    r.g_h = DenseMatrix(h.rows, h.cols);
    r.g_pos = DenseMatrix(h.rows, h.cols);
    r.g_neg = DenseMatrix(h.rows, h.cols);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = cosine(h.row(i), h_pos.row(i));
        const double b = cosine(h.row(i), h_neg.row(i));
        r.per_node[i] = softplus(b - a);
        r.value += r.per_node[i];
        const double s = sigmoid(b - a) * inv_n;
        add_cosine_grad(h.row(i), h_pos.row(i), -s, r.g_h.row(i), r.g_pos.row(i));
        add_cosine_grad(h.row(i), h_neg.row(i), s, r.g_h.row(i), r.g_neg.row(i));
    }
    r.value *= inv_n;
    return r;
}

ClusterLossResult cluster_loss(const DenseMatrix& h, const ClusterModel& model) {
    model.validate();
    if (model.assignments.size() != h.rows) throw ContractViolation("cluster_loss: assignments do not cover all rows");
    if (model.centers.cols != h.cols) throw ContractViolation("cluster_loss: center dimension mismatch");
    const double inv_n = 1.0 / static_cast<double>(h.rows);
    ClusterLossResult r;
    r.g_h = DenseMatrix(h.rows, h.cols);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const std::size_t kn = model.assignments[i];
        auto logp = assign_log_distribution(h.row(i), model);
        r.value -= logp[kn];
        // d/dh [-log p_kn] = (1/tau) sum_k (p_k - [k = kn]) c_k
        auto g = r.g_h.row(i);
        for (std::size_t k = 0; k < model.k(); ++k) {
            const double coef = (std::exp(logp[k]) - (k == kn ? 1.0 : 0.0)) * inv_n / model.tau;
            if (coef == 0.0) continue;
            auto c = model.centers.row(k);
            for (std::size_t j = 0; j < h.cols; ++j) g[j] += coef * c[j];
        }
    }
    r.value *= inv_n;
    return r;
}

AlignResult align_node(const std::vector<DenseMatrix>& h_all, const std::vector<DenseMatrix>& h_neg_all) {
    AlignResult r;
    const std::size_t v_count = h_all.size();
    if (h_neg_all.size() != v_count) throw ContractViolation("align_node: layer count mismatch");
    if (v_count < 2) return r;
    for (std::size_t v = 0; v < v_count; ++v) {
        require_same(h_all[0], h_all[v], "align_node");
        require_same(h_all[0], h_neg_all[v], "align_node");
    }
    const std::size_t n = h_all[0].rows;
    const double inv_z = 1.0 / static_cast<double>(n * v_count * (v_count - 1));
    r.per_layer.assign(v_count, 0.0);
    r.per_term.reserve(n * v_count * (v_count - 1));
    for (std::size_t v = 0; v < v_count; ++v) {
        r.g_h.emplace_back(h_all[v].rows, h_all[v].cols);
        r.g_neg.emplace_back(h_all[v].rows, h_all[v].cols);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t v = 0; v < v_count; ++v) {
            const auto hv = h_all[v].row(i);
            const auto hneg = h_neg_all[v].row(i);
            const double b = cosine(hv, hneg);
            for (std::size_t w = 0; w < v_count; ++w) {
                if (w == v) continue;
                const auto hw = h_all[w].row(i);
                const double a = cosine(hv, hw);
                const double term = softplus(b - a);
                r.per_term.push_back(term);
                r.per_layer[v] += term * inv_z;
                const double s = sigmoid(b - a) * inv_z;
                add_cosine_grad(hv, hw, -s, r.g_h[v].row(i), r.g_h[w].row(i));
                add_cosine_grad(hv, hneg, s, r.g_h[v].row(i), r.g_neg[v].row(i));
            }
        }
    }
    for (double p : r.per_layer) r.value += p;
    return r;
}

AlignResult align_cluster(const std::vector<DenseMatrix>& h_all, const std::vector<ClusterModel>& models,
                          const std::vector<DenseMatrix>* anchors) {
    AlignResult r;
    const std::size_t v_count = h_all.size();
    if (models.size() != v_count) throw ContractViolation("align_cluster: need one cluster model per layer");
    if (v_count < 2) return r;
    for (std::size_t v = 0; v < v_count; ++v) {
        require_same(h_all[0], h_all[v], "align_cluster");
        models[v].validate();
        if (models[v].centers.cols != h_all[v].cols) throw ContractViolation("align_cluster: center dimension mismatch");
    }
    if (anchors && (anchors->size() != v_count || !(*anchors)[0].same_shape(h_all[0])))
        throw ContractViolation("align_cluster: anchor embeddings do not match");
    const std::vector<DenseMatrix>& h_anchor = anchors ? *anchors : h_all;
    const std::size_t n = h_all[0].rows;
    const double inv_pair = 1.0 / static_cast<double>(n * (v_count - 1));
    const double inv_v = 1.0 / static_cast<double>(v_count);
    r.per_layer.assign(v_count, 0.0);
    for (std::size_t v = 0; v < v_count; ++v) r.g_h.emplace_back(h_all[v].rows, h_all[v].cols);

    for (std::size_t v = 0; v < v_count; ++v) {
        const ClusterModel& anchor = models[v];
        for (std::size_t i = 0; i < n; ++i) {
            const auto log_p = assign_log_distribution(h_anchor[v].row(i), anchor);
            std::vector<double> p(log_p.size());
            for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(log_p[k]);
            for (std::size_t w = 0; w < v_count; ++w) {
                if (w == v) continue;
                const auto log_q = assign_log_distribution(h_all[w].row(i), anchor);
                double kl = 0.0;
                for (std::size_t k = 0; k < p.size(); ++k)
                    if (p[k] > 0.0) kl += p[k] * (log_p[k] - log_q[k]);
                r.per_layer[v] += std::max(kl, 0.0) * inv_pair;
                // d KL/dh^w = (1/tau) sum_k (q_k - p_k) c_k
                const double scale = inv_pair * inv_v / anchor.tau;
                auto g = r.g_h[w].row(i);
                for (std::size_t k = 0; k < p.size(); ++k) {
                    const double coef = (std::exp(log_q[k]) - p[k]) * scale;
                    if (coef == 0.0) continue;
                    auto c = anchor.centers.row(k);
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] += coef * c[j];
                }
            }
        }
    }
    for (double p : r.per_layer) r.value += p;
    r.value *= inv_v;
    return r;
}

std::pair<LossReport, std::vector<EmbeddingGrads>> embedding_loss(const std::vector<LayerEmbeddings>& layers,
                                                                  const std::vector<ClusterModel>& models,
                                                                  const LossWeights& weights,
                                                                  const ObjectiveOptions& opts) {
    weights.validate();
    const std::size_t v_count = layers.size();
    if (v_count == 0) throw ContractViolation("embedding_loss: no layers");
    const bool with_clusters = !models.empty();
    if (with_clusters && models.size() != v_count) throw ContractViolation("embedding_loss: need one cluster model per layer");

    auto sign = [&](Term t) { return opts.flip_gradient_sign == t ? -1.0 : 1.0; };

    LossReport rep;
    rep.l_node_layer.assign(v_count, 0.0);
    rep.l_cluster_layer.assign(v_count, 0.0);
    std::vector<EmbeddingGrads> grads;
    grads.reserve(v_count);
    for (const auto& l : layers) {
        require_same(layers[0].h, l.h, "embedding_loss");
        require_same(l.h, l.h_pos, "embedding_loss");
        require_same(l.h, l.h_neg, "embedding_loss");
        grads.push_back({DenseMatrix(l.h.rows, l.h.cols), DenseMatrix(l.h.rows, l.h.cols), DenseMatrix(l.h.rows, l.h.cols)});
    }

    std::vector<NodeLossResult> node(v_count);
    std::vector<ClusterLossResult> clus(with_clusters ? v_count : 0);
    parallel_for(v_count, opts.threads, [&](std::size_t v) {
        node[v] = node_loss(layers[v].h, layers[v].h_pos, layers[v].h_neg);
        if (with_clusters) clus[v] = cluster_loss(layers[v].h, models[v]);
    });

    for (std::size_t v = 0; v < v_count; ++v) {
        rep.l_node_layer[v] = node[v].value;
        rep.l_node += node[v].value;
        const double s = weights.lambda_n * sign(Term::node);
        scale_into(grads[v].g_h, node[v].g_h, s);
        scale_into(grads[v].g_pos, node[v].g_pos, s);
        scale_into(grads[v].g_neg, node[v].g_neg, s);
        if (with_clusters) {
            rep.l_cluster_layer[v] = clus[v].value;
            rep.l_cluster += clus[v].value;
            scale_into(grads[v].g_h, clus[v].g_h, weights.lambda_c * sign(Term::cluster));
        }
    }

    if (v_count >= 2) {
        std::vector<DenseMatrix> h_all, h_neg_all;
        for (const auto& l : layers) {
            h_all.push_back(l.h);
            h_neg_all.push_back(l.h_neg);
        }
        auto an = align_node(h_all, h_neg_all);
        rep.r_node = an.value;
        rep.r_node_layer = an.per_layer;
        for (std::size_t v = 0; v < v_count; ++v) {
            scale_into(grads[v].g_h, an.g_h[v], weights.mu_n * sign(Term::align_node));
            scale_into(grads[v].g_neg, an.g_neg[v], weights.mu_n * sign(Term::align_node));
        }
        if (with_clusters) {
            auto ac = align_cluster(h_all, models, opts.frozen_anchors);
            rep.r_cluster = ac.value;
            rep.r_cluster_layer = ac.per_layer;
            for (std::size_t v = 0; v < v_count; ++v)
                scale_into(grads[v].g_h, ac.g_h[v], weights.mu_c * sign(Term::align_cluster));
        }
    }
    if (rep.r_node_layer.empty()) rep.r_node_layer.assign(v_count, 0.0);
    if (rep.r_cluster_layer.empty()) rep.r_cluster_layer.assign(v_count, 0.0);

    double total = 0.0;
    for (std::size_t v = 0; v < v_count; ++v)
        total += weights.lambda_n * rep.l_node_layer[v] + weights.lambda_c * rep.l_cluster_layer[v];
    rep.total = total + weights.mu_n * rep.r_node + weights.mu_c * rep.r_cluster;
    return {std::move(rep), std::move(grads)};
}

ObjectiveResult total_loss(const std::vector<EncoderParams>& params, const std::vector<LayerBatch>& batches,
                           const std::vector<ClusterModel>& models, const LossWeights& weights,
                           const ObjectiveOptions& opts) {
    if (params.size() != batches.size() || params.empty())
        throw ContractViolation("total_loss: need one encoder and one batch per layer");
    const std::size_t v_count = params.size();

    struct Caches {
        EncoderCache clean, pos, neg;
    };
    std::vector<Caches> caches(v_count);
    parallel_for(v_count, opts.threads, [&](std::size_t v) {
        const auto& b = batches[v];
        if (!b.a || !b.x) throw ContractViolation("total_loss: batch without clean inputs");
        caches[v].clean = forward_cached(params[v], *b.a, *b.x);
        caches[v].pos = forward_cached(params[v], b.positive.a, b.positive.x);
        caches[v].neg = forward_cached(params[v], *b.a, b.x_neg);
    });

    std::vector<LayerEmbeddings> emb;
    emb.reserve(v_count);
    for (const auto& c : caches) emb.push_back({c.clean.h, c.pos.h, c.neg.h});

    auto [report, eg] = embedding_loss(emb, models, weights, opts);

    ObjectiveResult out;
    out.report = std::move(report);
    out.grads.resize(v_count);
    parallel_for(v_count, opts.threads, [&](std::size_t v) {
        const auto& b = batches[v];
        EncoderGrad g = backward(params[v], caches[v].clean, *b.x, eg[v].g_h);
        g += backward(params[v], caches[v].pos, b.positive.x, eg[v].g_pos);
        g += backward(params[v], caches[v].neg, b.x_neg, eg[v].g_neg);
        out.grads[v] = std::move(g);
    });
    for (auto& c : caches) out.h_clean.push_back(std::move(c.clean.h));
    return out;
}

}  // namespace xgoal
