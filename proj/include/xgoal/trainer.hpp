#pragma once

#include "xgoal/cluster.hpp"
#include "xgoal/encoder.hpp"
#include "xgoal/graphdata.hpp"
#include "xgoal/objective.hpp"

#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace xgoal {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::size_t d = 128;
    double p_drop = 0.5;
    double learning_rate = 0.001;
    std::size_t warmup_epochs = 500;
    std::size_t max_epochs = 10000;
    std::size_t cluster_every = 5;
    std::size_t patience = 100;
    LossWeights weights;
    double tau = 0.2;
    std::map<std::string, std::size_t> k_clusters;  // per-layer override of Layer::k_clusters
    std::uint64_t seed = 0;
    bool deterministic = true;
    std::size_t threads = 1;  // ignored (forced to 1) when deterministic

    void validate() const;
    std::size_t worker_count() const { return deterministic ? 1 : std::max<std::size_t>(1, threads); }
    std::size_t k_for(const Layer& layer) const;
};

// Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8), no weight decay.
class Adam {
public:
    Adam() = default;
    explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> x, std::span<const double> g, double lr);
    std::size_t steps() const { return t_; }

    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

private:
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

struct LayerOptimizer {
    Adam w, w_self, bias;

    static LayerOptimizer for_params(const EncoderParams& p);
    void step(EncoderParams& p, const EncoderGrad& g, double lr);
};

struct TrainState {
    std::vector<EncoderParams> params;
    std::vector<LayerOptimizer> optim;
    std::vector<ClusterModel> models;
    std::vector<Rng> transform_rng;
    std::vector<Rng> cluster_rng;
    std::size_t warmup_done = 0;
    std::size_t epoch = 0;  // parameter updates taken in the main phase
    double best_total = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::size_t best_epoch = 0;
    std::vector<EncoderParams> best_params;
    std::vector<ClusterModel> best_models;
};

struct EpochRecord {
    std::string phase;  // "warmup" or "train"
    std::size_t epoch = 0;
    LossReport report;
};
using MetricsSink = std::function<void(const EpochRecord&)>;

struct EmbeddingSet {
    std::vector<std::string> names;
    std::vector<DenseMatrix> layers;
    DenseMatrix fused;
};

TrainState init_state(const MultiplexGraph& g, const TrainConfig& cfg, const Rng& rng);

// Node-level losses only (lambda_N sum_v L_N^v + mu_N R_N), fixed epoch count.
TrainState warmup(const MultiplexGraph& g, const TrainConfig& cfg, const Rng& rng, const MetricsSink& sink = {});
void run_warmup(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg, const MetricsSink& sink = {});

// K-means on clean-graph embeddings for every layer; touches only st.models.
void e_step(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg);
// One stochastic view draw, loss evaluation and Adam update; never touches st.models.
LossReport m_step(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg, const LossWeights& weights,
                  bool apply_update = true);

// Alternates E-steps every cluster_every epochs with M-steps; early-stops on
// the total loss. Returned state holds the best parameters in `params`.
std::pair<TrainState, EmbeddingSet> train(const MultiplexGraph& g, const TrainConfig& cfg, TrainState state,
                                          const MetricsSink& sink = {});

std::vector<LayerBatch> draw_batches(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg);

DenseMatrix fuse(const std::vector<DenseMatrix>& embeddings);
EmbeddingSet embed(const MultiplexGraph& g, const std::vector<EncoderParams>& params);

struct Checkpoint {
    std::vector<std::string> layer_names;
    std::vector<EncoderParams> params;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
};

// u64 header length, JSON index {layers: [{name, w, w_self, bias: {offset, rows, cols}}], seed, epoch},
// then f64 DenseMatrix blocks; offsets count from the first byte after the index.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace xgoal
