#include "xgoal/cli.hpp"

#include "xgoal/evalkit.hpp"
#include "xgoal/gradcheck.hpp"
#include "xgoal/graphdata.hpp"
#include "xgoal/parallel.hpp"
#include "xgoal/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace xgoal::cli {

json RunConfig::to_json() const {
    json j;
    j["data"] = data;
    j["out"] = out;
    j["train.d"] = train.d;
    j["train.p_drop"] = train.p_drop;
    j["train.lr"] = train.learning_rate;
    j["train.warmup"] = train.warmup_epochs;
    j["train.epochs"] = train.max_epochs;
    j["train.cluster_every"] = train.cluster_every;
    j["train.patience"] = train.patience;
    j["train.tau"] = train.tau;
    j["train.seed"] = train.seed;
    j["train.deterministic"] = train.deterministic;
    j["loss.lambda_n"] = train.weights.lambda_n;
    j["loss.lambda_c"] = train.weights.lambda_c;
    j["loss.mu_n"] = train.weights.mu_n;
    j["loss.mu_c"] = train.weights.mu_c;
    for (const auto& [name, k] : train.k_clusters) j["cluster.k." + name] = k;
    return j;
}

void RunConfig::apply_json(const json& j) {
    if (!j.is_object()) throw ContractViolation("config: top level must be a JSON object");
    const std::string k_prefix = "cluster.k.";
    for (const auto& [key, value] : j.items()) {
        if (key == "data") data = value.get<std::string>();
        else if (key == "out") out = value.get<std::string>();
        else if (key == "train.d") train.d = value.get<std::size_t>();
        else if (key == "train.p_drop") train.p_drop = value.get<double>();
        else if (key == "train.lr") train.learning_rate = value.get<double>();
        else if (key == "train.warmup") train.warmup_epochs = value.get<std::size_t>();
        else if (key == "train.epochs") train.max_epochs = value.get<std::size_t>();
        else if (key == "train.cluster_every") train.cluster_every = value.get<std::size_t>();
        else if (key == "train.patience") train.patience = value.get<std::size_t>();
        else if (key == "train.tau") train.tau = value.get<double>();
        else if (key == "train.seed") train.seed = value.get<std::uint64_t>();
        else if (key == "train.deterministic") train.deterministic = value.get<bool>();
        else if (key == "loss.lambda_n") train.weights.lambda_n = value.get<double>();
        else if (key == "loss.lambda_c") train.weights.lambda_c = value.get<double>();
        else if (key == "loss.mu_n") train.weights.mu_n = value.get<double>();
        else if (key == "loss.mu_c") train.weights.mu_c = value.get<double>();
        else if (key.rfind(k_prefix, 0) == 0) train.k_clusters[key.substr(k_prefix.size())] = value.get<std::size_t>();
        else throw ContractViolation("config: unknown key '" + key + "'");
    }
}

namespace {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw InputError("cannot write " + p.string());
    os << s;
}

void write_embeddings(const fs::path& dir, const EmbeddingSet& e) {
    for (std::size_t v = 0; v < e.layers.size(); ++v)
        save_matrix_f32((dir / ("embeddings-" + e.names[v] + ".bin")).string(), e.layers[v]);
    save_matrix_f32((dir / "embeddings-fused.bin").string(), e.fused);
}

json report_json(const EpochRecord& r) {
    return json{{"phase", r.phase},          {"epoch", r.epoch},
                {"l_node", r.report.l_node}, {"l_cluster", r.report.l_cluster},
                {"r_node", r.report.r_node}, {"r_cluster", r.report.r_cluster},
                {"total", r.report.total}};
}

struct TrainFlags {
    std::string config_file;
    std::vector<std::string> k_specs;
    double lr = 0, tau = 0, p_drop = 0, lambda_n = 0, lambda_c = 0, mu_n = 0, mu_c = 0;
    std::uint64_t seed = 0;
    std::size_t epochs = 0, warmup = 0, dim = 0, cluster_every = 0, patience = 0;
    bool deterministic = true;
};

int cmd_train(RunConfig rc, const TrainFlags& f, CLI::App& sub, std::ostream& out, std::ostream& err) {
    if (!f.config_file.empty()) {
        std::ifstream is(f.config_file);
        if (!is) throw InputError("cannot open config " + f.config_file);
        json j;
        try {
            is >> j;
        } catch (const json::exception& e) {
            throw InputError("config " + f.config_file + ": " + e.what());
        }
        RunConfig file_rc = rc;
        file_rc.apply_json(j);
        // Flags given on the command line win over the file.
        if (sub.count("--data")) file_rc.data = rc.data;
        if (sub.count("--out")) file_rc.out = rc.out;
        rc = file_rc;
    }
    auto& t = rc.train;
    if (sub.count("--lr")) t.learning_rate = f.lr;
    if (sub.count("--tau")) t.tau = f.tau;
    if (sub.count("--p-drop")) t.p_drop = f.p_drop;
    if (sub.count("--lambda-n")) t.weights.lambda_n = f.lambda_n;
    if (sub.count("--lambda-c")) t.weights.lambda_c = f.lambda_c;
    if (sub.count("--mu-n")) t.weights.mu_n = f.mu_n;
    if (sub.count("--mu-c")) t.weights.mu_c = f.mu_c;
    if (sub.count("--seed")) t.seed = f.seed;
    if (sub.count("--epochs")) t.max_epochs = f.epochs;
    if (sub.count("--warmup")) t.warmup_epochs = f.warmup;
    if (sub.count("--dim")) t.d = f.dim;
    if (sub.count("--cluster-every")) t.cluster_every = f.cluster_every;
    if (sub.count("--patience")) t.patience = f.patience;
    if (sub.count("--deterministic") || sub.count("--no-deterministic")) t.deterministic = f.deterministic;
    for (const auto& spec : f.k_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw InputError("--k expects <layer>=<int>, got '" + spec + "'");
        try {
            const long k = std::stol(spec.substr(eq + 1));
            if (k < 1) throw InputError("--k " + spec + ": k must be >= 1");
            t.k_clusters[spec.substr(0, eq)] = static_cast<std::size_t>(k);
        } catch (const std::logic_error&) {
            throw InputError("--k expects <layer>=<int>, got '" + spec + "'");
        }
    }
    if (rc.data.empty() || rc.out.empty()) throw InputError("train needs --data and --out");
    t.threads = threads_from_env();
    try {
        t.validate();
    } catch (const ContractViolation& e) {
        throw InputError(e.what());
    }

    const MultiplexGraph g = load_bundle(rc.data);
    for (const auto& [name, k] : t.k_clusters) {
        (void)g.layer(name);
        if (k > g.n_nodes) throw InputError("--k " + name + "=" + std::to_string(k) + " exceeds node count");
    }
    // Echo the resolved per-layer K for every layer.
    for (const auto& l : g.layers) t.k_clusters[l.name] = t.k_for(l);

    const fs::path dir(rc.out);
    fs::create_directories(dir);
    write_text(dir / "config.json", rc.to_json().dump(2) + "\n");

    std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
    MetricsSink sink = [&](const EpochRecord& r) { metrics << report_json(r).dump() << '\n'; };

    const Rng rng(t.seed);
    TrainState st = warmup(g, t, rng, sink);
    auto [final_state, emb] = train(g, t, std::move(st), sink);
    metrics.flush();

    Checkpoint ck;
    for (const auto& l : g.layers) ck.layer_names.push_back(l.name);
    ck.params = final_state.params;
    ck.seed = t.seed;
    ck.epoch = final_state.best_epoch;
    save_checkpoint((dir / "checkpoint.bin").string(), ck);
    write_embeddings(dir, emb);
    for (std::size_t v = 0; v < final_state.models.size(); ++v) {
        std::ofstream os(dir / ("assignments-" + g.layers[v].name + ".tsv"), std::ios::binary);
        for (std::size_t i = 0; i < final_state.models[v].assignments.size(); ++i)
            os << i << '\t' << final_state.models[v].assignments[i] << '\n';
    }
    out << "trained " << g.num_layers() << " layer(s): warmup " << final_state.warmup_done << " epochs, "
        << final_state.epoch << " updates, best total " << final_state.best_total << " at epoch "
        << final_state.best_epoch << "\n"
        << "wrote " << (dir / "embeddings-fused.bin").string() << " (" << emb.fused.rows << "x" << emb.fused.cols << ")\n";
    (void)err;
    return kOk;
}

int cmd_eval(const std::string& emb_path, const std::string& data, const std::string& task, std::size_t k_flag,
             std::uint64_t seed, std::string out_path, std::ostream& out) {
    const MultiplexGraph g = load_bundle(data);
    DenseMatrix h;
    try {
        h = load_matrix_f32(emb_path);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    if (h.rows != g.n_nodes) throw InputError("embeddings have " + std::to_string(h.rows) + " rows, bundle has " +
                                              std::to_string(g.n_nodes) + " nodes");
    const bool all = task == "all";
    if (!all && task != "classify" && task != "cluster" && task != "simsearch")
        throw InputError("unknown task '" + task + "'");
    if (!g.labels) throw InputError("task " + task + " needs labels.tsv in the bundle");

    EvalReport rep;
    rep.seed = seed;
    if (g.split) {
        rep.n_train = g.split->train.size();
        rep.n_val = g.split->val.size();
        rep.n_test = g.split->test.size();
    }
    if (all || task == "classify") {
        if (!g.split) throw InputError("task classify needs split.json in the bundle");
        F1Scores f1;
        try {
            f1 = classify(h, *g.labels, *g.split);
        } catch (const ContractViolation& e) {
            throw InputError(e.what());
        }
        rep.macro_f1 = f1.macro_f1;
        rep.micro_f1 = f1.micro_f1;
        rep.per_class_f1 = f1.per_class;
    }
    if (all || task == "cluster") {
        rep.k = k_flag ? k_flag : std::max<std::size_t>(1, g.num_classes());
        Rng rng(seed);
        rep.nmi = cluster_eval(h, *g.labels, rep.k, rng);
    }
    if (all || task == "simsearch") {
        try {
            rep.sim_at_5 = sim_search(h, *g.labels);
        } catch (const ContractViolation& e) {
            throw InputError(e.what());
        }
    }
    if (out_path.empty()) out_path = (fs::path(emb_path).parent_path() / "eval.json").string();
    write_text(out_path, rep.to_json() + "\n");
    out << rep.table(fs::path(emb_path).stem().string());
    return kOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t sweep, const std::string& fault_name, std::ostream& out,
                  std::ostream& err) {
    std::optional<Term> fault;
    if (!fault_name.empty()) {
        for (Term t : {Term::node, Term::cluster, Term::align_node, Term::align_cluster})
            if (term_name(t) == fault_name) fault = t;
        if (!fault) throw InputError("unknown fault term '" + fault_name + "'");
    }
    bool pass = true;
    for (std::size_t s = 0; s < std::max<std::size_t>(1, sweep); ++s) {
        const auto rep = run_gradcheck(seed + s, fault);
        out << "seed " << seed + s << "\n";
        for (const auto& t : rep.terms) {
            char line[160];
            std::snprintf(line, sizeof(line), "  %-8s max rel err %.3e over %zu entries  %s\n", t.term.c_str(),
                          t.max_rel_error, t.entries, t.pass ? "ok" : "FAIL");
            out << line;
            if (!t.pass) err << "gradcheck failed: seed " << seed + s << " term " << t.term << " worst entry "
                             << t.worst_entry << " (rel err " << t.max_rel_error << ")\n";
        }
        pass = pass && rep.pass;
    }
    out << (pass ? "gradcheck passed\n" : "gradcheck FAILED\n");
    return pass ? kOk : kVerificationFailed;
}

int cmd_embed(const std::string& ckpt, const std::string& data, const std::string& out_dir, std::ostream& out) {
    const MultiplexGraph g = load_bundle(data);
    Checkpoint ck;
    try {
        ck = load_checkpoint(ckpt);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    if (ck.layer_names.size() != g.num_layers()) throw InputError("checkpoint layer count differs from bundle");
    for (std::size_t v = 0; v < g.num_layers(); ++v) {
        if (ck.layer_names[v] != g.layers[v].name) throw InputError("checkpoint layer order differs from bundle");
        if (ck.params[v].in_dim() != g.attr_dim()) throw InputError("checkpoint attribute width differs from bundle");
    }
    fs::create_directories(out_dir);
    const auto e = embed(g, ck.params);
    write_embeddings(out_dir, e);
    out << "wrote " << e.layers.size() << " layer embeddings and fused embeddings to " << out_dir << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multiplex graph prototypical contrastive learning"};
    app.require_subcommand(1);

    RunConfig rc;
    TrainFlags tf;
    auto* train = app.add_subcommand("train", "warm up and train encoders on a bundle");
    train->add_option("--data", rc.data, "bundle directory");
    train->add_option("--out", rc.out, "run directory");
    train->add_option("--config", tf.config_file, "JSON config with flat dotted keys");
    train->add_option("--lr", tf.lr);
    train->add_option("--k", tf.k_specs, "per-layer cluster count <layer>=<int>, repeatable");
    train->add_option("--tau", tf.tau);
    train->add_option("--seed", tf.seed);
    train->add_option("--epochs", tf.epochs, "max training epochs after warm-up");
    train->add_option("--warmup", tf.warmup, "warm-up epochs");
    train->add_option("--dim", tf.dim, "embedding dimension");
    train->add_option("--cluster-every", tf.cluster_every);
    train->add_option("--patience", tf.patience);
    train->add_option("--p-drop", tf.p_drop);
    train->add_option("--lambda-n", tf.lambda_n);
    train->add_option("--lambda-c", tf.lambda_c);
    train->add_option("--mu-n", tf.mu_n);
    train->add_option("--mu-c", tf.mu_c);
    train->add_flag("--deterministic,!--no-deterministic", tf.deterministic);

    std::string emb_path, eval_data, task = "all", eval_out;
    std::size_t eval_k = 0;
    std::uint64_t eval_seed = 0;
    auto* eval = app.add_subcommand("eval", "evaluate frozen embeddings");
    eval->add_option("--embeddings", emb_path)->required();
    eval->add_option("--data", eval_data)->required();
    eval->add_option("--task", task)->check(CLI::IsMember({"classify", "cluster", "simsearch", "all"}));
    eval->add_option("--k", eval_k, "clusters for the clustering task (default: class count)");
    eval->add_option("--seed", eval_seed);
    eval->add_option("--out", eval_out, "eval.json path (default: next to the embeddings)");

    std::uint64_t gc_seed = 0;
    std::size_t gc_sweep = 5;
    std::string gc_fault;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference certification of all gradients");
    gradcheck->add_option("--seed", gc_seed, "first seed");
    gradcheck->add_option("--sweep", gc_sweep, "number of consecutive seeds");
    gradcheck->add_option("--inject-fault", gc_fault, "debug: negate one term's gradient (node|cluster|align_node|align_cluster)");

    SynthSpec ss;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a planted-partition multiplex bundle");
    synth->add_option("--n", ss.n_nodes);
    synth->add_option("--layers", ss.n_layers);
    synth->add_option("--communities", ss.n_communities);
    synth->add_option("--p-in", ss.p_in);
    synth->add_option("--p-out", ss.p_out);
    synth->add_option("--attr-dim", ss.attr_dim);
    synth->add_option("--noise", ss.noise);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();

    std::string ck_path, embed_data, embed_out;
    auto* embed_cmd = app.add_subcommand("embed", "forward pass from a checkpoint");
    embed_cmd->add_option("--checkpoint", ck_path)->required();
    embed_cmd->add_option("--data", embed_data)->required();
    embed_cmd->add_option("--out", embed_out)->required();

    std::vector<std::string> storage{"xgoal"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (*train) return cmd_train(rc, tf, *train, out, err);
        if (*eval) return cmd_eval(emb_path, eval_data, task, eval_k, eval_seed, eval_out, out);
        if (*gradcheck) return cmd_gradcheck(gc_seed, gc_sweep, gc_fault, out, err);
        if (*embed_cmd) return cmd_embed(ck_path, embed_data, embed_out, out);
        if (*synth) {
            if (!(ss.p_in > ss.p_out)) throw InputError("--p-in must exceed --p-out");
            Rng rng(synth_seed);
            save_bundle(generate_synthetic(ss, rng), synth_out);
            out << "wrote bundle to " << synth_out << "\n";
            return kOk;
        }
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kDiverged;
    } catch (const LoadError& e) {
        err << "load error: " << e.what() << "\n";
        return kInputError;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const ContractViolation& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}

}  // namespace xgoal::cli
