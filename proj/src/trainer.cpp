#include "xgoal/trainer.hpp"

#include "xgoal/parallel.hpp"
#include "xgoal/transform.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

using json = nlohmann::json;

namespace xgoal {

void TrainConfig::validate() const {
    if (d < 1) throw ContractViolation("d must be >= 1");
    TransformConfig{p_drop, seed}.validate();
    if (!(learning_rate > 0.0)) throw ContractViolation("learning_rate must be > 0");
    if (cluster_every < 1) throw ContractViolation("cluster_every must be >= 1");
    if (patience < 1) throw ContractViolation("patience must be >= 1");
    if (!(tau > 0.0)) throw ContractViolation("tau must be > 0");
    weights.validate();
    for (const auto& [name, k] : k_clusters)
        if (k < 1) throw ContractViolation("k for layer " + name + " must be >= 1");
}

std::size_t TrainConfig::k_for(const Layer& layer) const {
    auto it = k_clusters.find(layer.name);
    return it != k_clusters.end() ? it->second : layer.k_clusters;
}

void Adam::step(std::span<double> x, std::span<const double> g, double lr) {
    if (m_.size() != x.size()) {
        m_.assign(x.size(), 0.0);
        v_.assign(x.size(), 0.0);
        t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < x.size(); ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m_[i] / c1;
        const double vhat = v_[i] / c2;
        x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

LayerOptimizer LayerOptimizer::for_params(const EncoderParams& p) {
    return LayerOptimizer{Adam(p.w.data.size()), Adam(p.w_self.data.size()), Adam(p.bias.size())};
}

void LayerOptimizer::step(EncoderParams& p, const EncoderGrad& g, double lr) {
    w.step(p.w.data, g.gw.data, lr);
    w_self.step(p.w_self.data, g.gw_self.data, lr);
    bias.step(p.bias, g.gbias, lr);
}

TrainState init_state(const MultiplexGraph& g, const TrainConfig& cfg, const Rng& rng) {
    cfg.validate();
    if (g.num_layers() == 0) throw ContractViolation("graph has no layers");
    TrainState st;
    for (std::size_t v = 0; v < g.num_layers(); ++v) {
        Rng init = rng.fork(100 + v);
        st.params.push_back(EncoderParams::init(g.attr_dim(), cfg.d, init));
        st.optim.push_back(LayerOptimizer::for_params(st.params.back()));
        st.transform_rng.push_back(rng.fork(200 + v));
        st.cluster_rng.push_back(rng.fork(300 + v));
        if (cfg.k_for(g.layers[v]) > g.n_nodes)
            throw ContractViolation("layer " + g.layers[v].name + ": k exceeds node count");
    }
    return st;
}

std::vector<LayerBatch> draw_batches(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg) {
    std::vector<LayerBatch> batches(g.num_layers());
    const TransformConfig tcfg{cfg.p_drop, cfg.seed};
    for (std::size_t v = 0; v < g.num_layers(); ++v) {
        auto& b = batches[v];
        b.a = &g.layers[v].adjacency_norm;
        b.x = &g.attributes;
        b.positive = positive_transform(g.attributes, g.layers[v].adjacency_norm, tcfg, st.transform_rng[v]);
        b.x_neg = negative_transform(g.attributes, st.transform_rng[v]);
    }
    return batches;
}

namespace {

void check_finite(const LossReport& r, const std::string& phase, std::size_t epoch) {
    const std::pair<const char*, double> terms[] = {
        {"l_node", r.l_node}, {"l_cluster", r.l_cluster}, {"r_node", r.r_node}, {"r_cluster", r.r_cluster}, {"total", r.total}};
    for (const auto& [name, value] : terms)
        if (!std::isfinite(value))
            throw DivergenceError(phase + " epoch " + std::to_string(epoch) + ": term " + name + " is not finite");
}

}  // namespace

LossReport m_step(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg, const LossWeights& weights,
                  bool apply_update) {
    auto batches = draw_batches(st, g, cfg);
    ObjectiveOptions opts;
    opts.threads = cfg.worker_count();
    auto res = total_loss(st.params, batches, st.models, weights, opts);
    check_finite(res.report, "m_step", st.epoch);
    if (apply_update) {
        for (std::size_t v = 0; v < st.params.size(); ++v) st.optim[v].step(st.params[v], res.grads[v], cfg.learning_rate);
    }
    return res.report;
}

void e_step(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg) {
    const std::size_t v_count = g.num_layers();
    std::vector<ClusterModel> models(v_count);
    KMeansOptions kopts;
    kopts.tau = cfg.tau;
    parallel_for(v_count, cfg.worker_count(), [&](std::size_t v) {
        const DenseMatrix h = forward(st.params[v], g.layers[v].adjacency_norm, g.attributes);
        models[v] = kmeans(h, cfg.k_for(g.layers[v]), st.cluster_rng[v], kopts);
    });
    st.models = std::move(models);
}

void run_warmup(TrainState& st, const MultiplexGraph& g, const TrainConfig& cfg, const MetricsSink& sink) {
    LossWeights w = cfg.weights;
    w.lambda_c = 0.0;
    w.mu_c = 0.0;
    const auto saved = std::move(st.models);
    st.models.clear();
    for (std::size_t e = 0; e < cfg.warmup_epochs; ++e) {
        // Evaluate first so a diverged loss never reaches the parameters.
        auto batches = draw_batches(st, g, cfg);
        ObjectiveOptions opts;
        opts.threads = cfg.worker_count();
        auto res = total_loss(st.params, batches, st.models, w, opts);
        check_finite(res.report, "warmup", e);
        if (sink) sink({"warmup", e, res.report});
        for (std::size_t v = 0; v < st.params.size(); ++v) st.optim[v].step(st.params[v], res.grads[v], cfg.learning_rate);
        ++st.warmup_done;
    }
    st.models = saved;
}

TrainState warmup(const MultiplexGraph& g, const TrainConfig& cfg, const Rng& rng, const MetricsSink& sink) {
    TrainState st = init_state(g, cfg, rng);
    run_warmup(st, g, cfg, sink);
    return st;
}

std::pair<TrainState, EmbeddingSet> train(const MultiplexGraph& g, const TrainConfig& cfg, TrainState st,
                                          const MetricsSink& sink) {
    cfg.validate();
    ObjectiveOptions opts;
    opts.threads = cfg.worker_count();
    for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
        if (e % cfg.cluster_every == 0) e_step(st, g, cfg);
        auto batches = draw_batches(st, g, cfg);
        auto res = total_loss(st.params, batches, st.models, cfg.weights, opts);
        check_finite(res.report, "train", e);
        if (sink) sink({"train", e, res.report});

        if (res.report.total < st.best_total) {
            st.best_total = res.report.total;
            st.best_epoch = e;
            st.best_params = st.params;
            st.best_models = st.models;
            st.since_best = 0;
        } else if (++st.since_best >= cfg.patience) {
            break;
        }
        for (std::size_t v = 0; v < st.params.size(); ++v) st.optim[v].step(st.params[v], res.grads[v], cfg.learning_rate);
        ++st.epoch;
    }
    if (!st.best_params.empty()) {
        st.params = st.best_params;
        st.models = st.best_models;
    }
    EmbeddingSet emb = embed(g, st.params);
    return {std::move(st), std::move(emb)};
}

DenseMatrix fuse(const std::vector<DenseMatrix>& embeddings) {
    if (embeddings.empty()) throw ContractViolation("fuse: no embeddings");
    DenseMatrix out(embeddings[0].rows, embeddings[0].cols);
    for (const auto& h : embeddings) {
        if (!h.same_shape(out)) throw ContractViolation("fuse: shape mismatch");
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += h.data[i];
    }
    const double inv = 1.0 / static_cast<double>(embeddings.size());
    for (double& v : out.data) v *= inv;
    return out;
}

EmbeddingSet embed(const MultiplexGraph& g, const std::vector<EncoderParams>& params) {
    if (params.size() != g.num_layers()) throw ContractViolation("embed: need one encoder per layer");
    EmbeddingSet e;
    for (std::size_t v = 0; v < params.size(); ++v) {
        e.names.push_back(g.layers[v].name);
        e.layers.push_back(forward(params[v], g.layers[v].adjacency_norm, g.attributes));
    }
    e.fused = fuse(e.layers);
    return e;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    if (ck.layer_names.size() != ck.params.size()) throw ContractViolation("checkpoint: names/params length mismatch");
    std::vector<const DenseMatrix*> blocks;
    std::vector<DenseMatrix> biases;
    biases.reserve(ck.params.size());
    for (const auto& p : ck.params) biases.emplace_back(1, p.bias.size(), p.bias);

    auto block_bytes = [](const DenseMatrix& m) { return 16 + m.data.size() * sizeof(double); };

    json idx;
    idx["format"] = "xgoal-checkpoint-v1";
    idx["seed"] = ck.seed;
    idx["epoch"] = ck.epoch;
    idx["layers"] = json::array();
    std::uint64_t cursor = 0;
    for (std::size_t v = 0; v < ck.params.size(); ++v) {
        json lj;
        lj["name"] = ck.layer_names[v];
        const DenseMatrix* parts[3] = {&ck.params[v].w, &ck.params[v].w_self, &biases[v]};
        const char* keys[3] = {"w", "w_self", "bias"};
        for (int k = 0; k < 3; ++k) {
            lj[keys[k]] = {{"offset", cursor}, {"rows", parts[k]->rows}, {"cols", parts[k]->cols}};
            cursor += block_bytes(*parts[k]);
            blocks.push_back(parts[k]);
        }
        idx["layers"].push_back(lj);
    }
    const std::string header = idx.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    const std::uint64_t len = header.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto* b : blocks) write_matrix_f64(os, *b);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::uint64_t len = 0;
    if (!is.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1u << 30))
        throw std::runtime_error("checkpoint: bad header in " + path);
    std::string header(len, '\0');
    if (!is.read(header.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("checkpoint: truncated index");
    json idx = json::parse(header);
    Checkpoint ck;
    ck.seed = idx.at("seed").get<std::uint64_t>();
    ck.epoch = idx.at("epoch").get<std::size_t>();
    const std::uint64_t base = sizeof(len) + len;
    auto read_block = [&](const json& meta) {
        is.seekg(static_cast<std::streamoff>(base + meta.at("offset").get<std::uint64_t>()));
        DenseMatrix m = read_matrix_f64(is);
        if (m.rows != meta.at("rows").get<std::size_t>() || m.cols != meta.at("cols").get<std::size_t>())
            throw std::runtime_error("checkpoint: block shape disagrees with index");
        return m;
    };
    for (const auto& lj : idx.at("layers")) {
        ck.layer_names.push_back(lj.at("name").get<std::string>());
        EncoderParams p;
        p.w = read_block(lj.at("w"));
        p.w_self = read_block(lj.at("w_self"));
        p.bias = read_block(lj.at("bias")).data;
        p.validate();
        ck.params.push_back(std::move(p));
    }
    return ck;
}

}  // namespace xgoal
