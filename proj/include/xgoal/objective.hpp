#pragma once

#include "xgoal/cluster.hpp"
#include "xgoal/encoder.hpp"
#include "xgoal/numkit.hpp"
#include "xgoal/transform.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace xgoal {

struct LossWeights {
    double lambda_n = 1.0;
    double lambda_c = 1.0;
    double mu_n = 1.0;
    double mu_c = 1.0;

    void validate() const;
};

enum class Term { node, cluster, align_node, align_cluster };
std::string_view term_name(Term t);

struct LossReport {
    double l_node = 0.0;     // sum over layers of L_N^v
    double l_cluster = 0.0;  // sum over layers of L_C^v
    double r_node = 0.0;
    double r_cluster = 0.0;
    double total = 0.0;
    std::vector<double> l_node_layer;
    std::vector<double> l_cluster_layer;
    std::vector<double> r_node_layer;     // anchor-layer share; sums to r_node
    std::vector<double> r_cluster_layer;  // R_C^v; r_cluster is their mean
};

// -(1/N) sum_n log(e^{cos(h,h+)} / (e^{cos(h,h+)} + e^{cos(h,h-)}))
struct NodeLossResult {
    double value = 0.0;
    std::vector<double> per_node;  // unscaled per-node terms
    DenseMatrix g_h, g_pos, g_neg;
};
NodeLossResult node_loss(const DenseMatrix& h, const DenseMatrix& h_pos, const DenseMatrix& h_neg);

// -(1/N) sum_n log p(k_n | h_n); centers are constants.
struct ClusterLossResult {
    double value = 0.0;
    DenseMatrix g_h;
};
ClusterLossResult cluster_loss(const DenseMatrix& h, const ClusterModel& model);

struct AlignResult {
    double value = 0.0;
    std::vector<double> per_layer;  // see LossReport::r_*_layer
    std::vector<double> per_term;   // node alignment only: unscaled (n, v, v') terms
    std::vector<DenseMatrix> g_h;
    std::vector<DenseMatrix> g_neg;  // node alignment only
};
// Z = N V (V-1); fewer than two layers gives zero with empty gradients.
AlignResult align_node(const std::vector<DenseMatrix>& h_all, const std::vector<DenseMatrix>& h_neg_all);
// Anchor distributions p_n^v are stop-gradient; only the recovered side q is differentiated.
// When anchors is given, p_n^v is computed from (*anchors)[v] instead of h_all[v].
AlignResult align_cluster(const std::vector<DenseMatrix>& h_all, const std::vector<ClusterModel>& models,
                          const std::vector<DenseMatrix>* anchors = nullptr);

struct LayerEmbeddings {
    DenseMatrix h;
    DenseMatrix h_pos;
    DenseMatrix h_neg;
};

struct EmbeddingGrads {
    DenseMatrix g_h;
    DenseMatrix g_pos;
    DenseMatrix g_neg;
};

struct ObjectiveOptions {
    // Test hook: negates the analytic gradient of one term.
    std::optional<Term> flip_gradient_sign;
    // Test hook: clean embeddings the cluster-alignment anchors are computed from,
    // so finite differences see p held fixed.
    const std::vector<DenseMatrix>* frozen_anchors = nullptr;
    std::size_t threads = 1;
};

// Combined objective over embeddings. Cluster terms are evaluated only when
// models has one entry per layer.
std::pair<LossReport, std::vector<EmbeddingGrads>> embedding_loss(const std::vector<LayerEmbeddings>& layers,
                                                                  const std::vector<ClusterModel>& models,
                                                                  const LossWeights& weights,
                                                                  const ObjectiveOptions& opts = {});

// Encoder inputs for one layer at one step. The clean adjacency and attributes
// are borrowed and must outlive the batch.
struct LayerBatch {
    const SparseMatrix* a = nullptr;
    const DenseMatrix* x = nullptr;
    PositiveView positive;
    DenseMatrix x_neg;  // paired with the clean adjacency
};

struct ObjectiveResult {
    LossReport report;
    std::vector<EncoderGrad> grads;
    std::vector<DenseMatrix> h_clean;
};

ObjectiveResult total_loss(const std::vector<EncoderParams>& params, const std::vector<LayerBatch>& batches,
                           const std::vector<ClusterModel>& models, const LossWeights& weights,
                           const ObjectiveOptions& opts = {});

}  // namespace xgoal
