#include "xgoal/graphdata.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace xgoal {

std::size_t MultiplexGraph::num_classes() const {
    if (!labels) return 0;
    int mx = -1;
    for (int l : *labels) mx = std::max(mx, l);
    return static_cast<std::size_t>(mx + 1);
}

const Layer& MultiplexGraph::layer(const std::string& name) const {
    for (const auto& l : layers)
        if (l.name == name) return l;
    throw ContractViolation("no layer named '" + name + "'");
}

void MultiplexGraph::validate() const {
    if (attributes.rows != n_nodes) throw ContractViolation("attribute rows != n_nodes");
    if (!all_finite(attributes)) throw ContractViolation("non-finite attribute");
    for (const auto& l : layers) {
        if (l.adjacency_raw.rows != n_nodes || l.adjacency_raw.cols != n_nodes)
            throw ContractViolation("layer " + l.name + ": adjacency is not N x N");
        l.adjacency_raw.validate();
        for (std::size_t i = 0; i < n_nodes; ++i)
            for (std::size_t k = l.adjacency_raw.offsets[i]; k < l.adjacency_raw.offsets[i + 1]; ++k)
                if (l.adjacency_raw.at(l.adjacency_raw.indices[k], i) != l.adjacency_raw.values[k])
                    throw ContractViolation("layer " + l.name + ": adjacency not symmetric");
        if (l.k_clusters < 1) throw ContractViolation("layer " + l.name + ": k_clusters must be >= 1");
    }
    if (labels && labels->size() != n_nodes) throw ContractViolation("labels length != n_nodes");
    if (split) {
        std::set<std::size_t> seen;
        for (const auto* part : {&split->train, &split->val, &split->test}) {
            for (std::size_t n : *part) {
                if (n >= n_nodes) throw ContractViolation("split node id out of range");
                if (!seen.insert(n).second) throw ContractViolation("split sets overlap at node " + std::to_string(n));
                if (labels && (*labels)[n] < 0) throw ContractViolation("split node " + std::to_string(n) + " has no label");
            }
        }
        if (!labels && !seen.empty()) throw ContractViolation("split given without labels");
    }
}

SparseMatrix normalize_adjacency(const SparseMatrix& a) {
    if (a.rows != a.cols) throw ContractViolation("normalize_adjacency: matrix not square");
    std::vector<double> inv_sqrt(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double deg = 0.0;
        for (std::size_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
            if (a.values[k] < 0.0) throw ContractViolation("normalize_adjacency: negative weight");
            deg += a.values[k];
        }
        inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    SparseMatrix n = a;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k)
            n.values[k] = a.values[k] * inv_sqrt[i] * inv_sqrt[a.indices[k]];
    return n;
}

Layer make_layer(std::string name, SparseMatrix raw, std::size_t k_clusters) {
    Layer l;
    l.name = std::move(name);
    l.adjacency_norm = normalize_adjacency(raw);
    l.adjacency_raw = std::move(raw);
    l.k_clusters = k_clusters;
    return l;
}

namespace {

[[noreturn]] void fail(const fs::path& file, std::size_t line, const std::string& msg) {
    std::string where = file.filename().string();
    if (line > 0) where += ":" + std::to_string(line);
    throw LoadError(where + ": " + msg);
}

std::vector<std::string_view> split_tabs(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find('\t', start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, std::size_t& out) {
    s = trim(s);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::ifstream open_or_fail(const fs::path& p) {
    if (!fs::exists(p)) fail(p, 0, "missing file");
    std::ifstream is(p, std::ios::binary);
    if (!is) fail(p, 0, "cannot open");
    return is;
}

DenseMatrix read_attributes_tsv(const fs::path& p, std::size_t n, std::size_t d) {
    auto is = open_or_fail(p);
    DenseMatrix x(n, d);
    std::string line;
    std::size_t row = 0;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (row >= n) fail(p, lineno, "more than " + std::to_string(n) + " attribute rows");
        auto fields = split_tabs(trim(line));
        if (fields.size() != d)
            fail(p, lineno, "expected " + std::to_string(d) + " columns, found " + std::to_string(fields.size()));
        for (std::size_t j = 0; j < d; ++j)
            if (!parse_double(fields[j], x(row, j))) fail(p, lineno, "non-numeric attribute '" + std::string(fields[j]) + "'");
        ++row;
    }
    if (row != n) fail(p, lineno, "expected " + std::to_string(n) + " attribute rows, found " + std::to_string(row));
    return x;
}

SparseMatrix read_edges(const fs::path& p, std::size_t n) {
    auto is = open_or_fail(p);
    // Keyed by directed pair; a repeated pair keeps the max weight.
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> directed;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto f = split_tabs(t);
        if (f.size() < 2 || f.size() > 3) fail(p, lineno, "expected src<TAB>dst[<TAB>weight]");
        std::size_t s = 0, d = 0;
        if (!parse_index(f[0], s) || !parse_index(f[1], d)) fail(p, lineno, "non-integer node id");
        if (s >= n || d >= n) fail(p, lineno, "node id >= n_nodes (" + std::to_string(n) + ")");
        double w = 1.0;
        if (f.size() == 3 && !parse_double(f[2], w)) fail(p, lineno, "non-numeric weight");
        if (w < 0.0) fail(p, lineno, "negative weight");
        auto [it, inserted] = directed.try_emplace({s, d}, w, lineno);
        if (!inserted && w > it->second.first) it->second = {w, lineno};
    }
    std::vector<SparseMatrix::Triplet> trip;
    for (const auto& [key, val] : directed) {
        const auto [s, d] = key;
        if (s == d) {
            trip.push_back({s, d, val.first});
            continue;
        }
        auto rev = directed.find({d, s});
        if (rev != directed.end()) {
            if (rev->second.first != val.first)
                fail(p, std::max(val.second, rev->second.second),
                     "asymmetric weight conflict for edge " + std::to_string(s) + "-" + std::to_string(d));
            if (s < d) {
                trip.push_back({s, d, val.first});
                trip.push_back({d, s, val.first});
            }
        } else {
            trip.push_back({s, d, val.first});
            trip.push_back({d, s, val.first});
        }
    }
    return SparseMatrix::from_triplets(n, n, std::move(trip));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

MultiplexGraph load_bundle(const std::string& dir_str) {
    const fs::path dir(dir_str);
    if (!fs::is_directory(dir)) throw LoadError(dir_str + ": not a directory");

    const auto meta_path = dir / "meta.json";
    json meta;
    {
        auto is = open_or_fail(meta_path);
        try {
            is >> meta;
        } catch (const json::exception& e) {
            fail(meta_path, 0, std::string("invalid JSON: ") + e.what());
        }
    }

    MultiplexGraph g;
    std::size_t d_x = 0;
    try {
        g.n_nodes = meta.at("n_nodes").get<std::size_t>();
        d_x = meta.at("attr_dim").get<std::size_t>();
    } catch (const json::exception& e) {
        fail(meta_path, 0, e.what());
    }
    if (!meta.contains("layers") || !meta["layers"].is_array() || meta["layers"].empty())
        fail(meta_path, 0, "'layers' must be a non-empty array");

    const std::string attr_format = meta.value("attr_format", "tsv");
    if (attr_format == "bin") {
        const auto p = dir / "attributes.bin";
        auto is = open_or_fail(p);
        try {
            g.attributes = read_matrix_f32(is);
        } catch (const std::exception& e) {
            fail(p, 0, e.what());
        }
        if (g.attributes.rows != g.n_nodes || g.attributes.cols != d_x) fail(p, 0, "shape disagrees with meta.json");
        if (!all_finite(g.attributes)) fail(p, 0, "non-finite attribute");
    } else if (attr_format == "tsv") {
        g.attributes = read_attributes_tsv(dir / "attributes.tsv", g.n_nodes, d_x);
    } else {
        fail(meta_path, 0, "unknown attr_format '" + attr_format + "'");
    }

    const auto labels_path = dir / "labels.tsv";
    if (fs::exists(labels_path)) {
        auto is = open_or_fail(labels_path);
        std::vector<int> labels(g.n_nodes, -1);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            auto t = trim(line);
            if (t.empty()) continue;
            auto f = split_tabs(t);
            std::size_t node = 0, cls = 0;
            if (f.size() != 2 || !parse_index(f[0], node) || !parse_index(f[1], cls))
                fail(labels_path, lineno, "expected node<TAB>class");
            if (node >= g.n_nodes) fail(labels_path, lineno, "node id >= n_nodes");
            labels[node] = static_cast<int>(cls);
        }
        g.labels = std::move(labels);
    }

    std::size_t default_k = 10;
    if (g.labels) default_k = std::max<std::size_t>(1, g.num_classes());

    for (const auto& lj : meta["layers"]) {
        std::string name;
        std::size_t k = default_k;
        try {
            name = lj.at("name").get<std::string>();
            if (lj.contains("k_clusters")) k = lj["k_clusters"].get<std::size_t>();
        } catch (const json::exception& e) {
            fail(meta_path, 0, e.what());
        }
        if (k < 1) fail(meta_path, 0, "layer " + name + ": k_clusters must be >= 1");
        g.layers.push_back(make_layer(name, read_edges(dir / ("edges-" + name + ".tsv"), g.n_nodes), k));
    }

    const auto split_path = dir / "split.json";
    if (fs::exists(split_path)) {
        auto is = open_or_fail(split_path);
        json sj;
        Split s;
        try {
            is >> sj;
            s.train = sj.at("train").get<std::vector<std::size_t>>();
            s.val = sj.value("val", std::vector<std::size_t>{});
            s.test = sj.at("test").get<std::vector<std::size_t>>();
        } catch (const json::exception& e) {
            fail(split_path, 0, e.what());
        }
        g.split = std::move(s);
    }

    try {
        g.validate();
    } catch (const ContractViolation& e) {
        throw LoadError(dir_str + ": " + e.what());
    }
    return g;
}

void save_bundle(const MultiplexGraph& g, const std::string& dir_str) {
    const fs::path dir(dir_str);
    fs::create_directories(dir);

    json meta;
    meta["n_nodes"] = g.n_nodes;
    meta["attr_dim"] = g.attr_dim();
    meta["attr_format"] = "tsv";
    meta["layers"] = json::array();
    for (const auto& l : g.layers) meta["layers"].push_back({{"name", l.name}, {"k_clusters", l.k_clusters}});
    std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";

    {
        std::ofstream os(dir / "attributes.tsv", std::ios::binary);
        for (std::size_t i = 0; i < g.n_nodes; ++i) {
            for (std::size_t j = 0; j < g.attr_dim(); ++j) {
                if (j) os << '\t';
                os << format_double(g.attributes(i, j));
            }
            os << '\n';
        }
    }

    for (const auto& l : g.layers) {
        std::ofstream os(dir / ("edges-" + l.name + ".tsv"), std::ios::binary);
        const auto& a = l.adjacency_raw;
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k)
                if (a.indices[k] >= i) os << i << '\t' << a.indices[k] << '\t' << format_double(a.values[k]) << '\n';
    }

    if (g.labels) {
        std::ofstream os(dir / "labels.tsv", std::ios::binary);
        for (std::size_t i = 0; i < g.n_nodes; ++i)
            if ((*g.labels)[i] >= 0) os << i << '\t' << (*g.labels)[i] << '\n';
    }
    if (g.split) {
        json sj{{"train", g.split->train}, {"val", g.split->val}, {"test", g.split->test}};
        std::ofstream(dir / "split.json") << sj.dump() << "\n";
    }
}

MultiplexGraph generate_synthetic(const SynthSpec& spec, Rng& rng) {
    if (spec.n_nodes < 1 || spec.n_layers < 1 || spec.n_communities < 1 || spec.n_communities > spec.n_nodes)
        throw ContractViolation("generate_synthetic: need 1 <= communities <= nodes and >= 1 layer");
    if (!(spec.p_in > 0.0 && spec.p_in <= 1.0) || !(spec.p_out >= 0.0 && spec.p_out <= 1.0))
        throw ContractViolation("generate_synthetic: probabilities must lie in [0, 1]");
    if (!(spec.p_in > spec.p_out)) throw ContractViolation("generate_synthetic: p_in must exceed p_out");
    if (spec.noise < 0.0) throw ContractViolation("generate_synthetic: noise must be >= 0");

    const std::size_t n = spec.n_nodes;
    const std::size_t c = spec.n_communities;

    MultiplexGraph g;
    g.n_nodes = n;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i * c / n);

    for (std::size_t v = 0; v < spec.n_layers; ++v) {
        Rng lr = rng.fork(v + 1);
        std::vector<SparseMatrix::Triplet> trip;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double p = labels[i] == labels[j] ? spec.p_in : spec.p_out;
                if (lr.uniform() < p) {
                    trip.push_back({i, j, 1.0});
                    trip.push_back({j, i, 1.0});
                }
            }
        }
        g.layers.push_back(make_layer("layer" + std::to_string(v), SparseMatrix::from_triplets(n, n, std::move(trip)), c));
    }

    Rng ar = rng.fork(1000);
    g.attributes = DenseMatrix(n, spec.attr_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < spec.attr_dim; ++j) {
            const double centroid = (j % c) == static_cast<std::size_t>(labels[i]) ? 1.0 : 0.0;
            g.attributes(i, j) = spec.noise > 0.0 ? centroid + spec.noise * ar.normal() : centroid;
        }

    // Stratified 10/10/80 split; every community keeps at least one training node.
    Rng sr = rng.fork(2000);
    Split split;
    for (std::size_t cls = 0; cls < c; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == static_cast<int>(cls)) members.push_back(i);
        const auto perm = sr.permutation(members.size());
        const std::size_t m = members.size();
        const std::size_t n_train = std::max<std::size_t>(1, m / 10);
        const std::size_t n_val = std::min(m - n_train, m / 10);
        for (std::size_t t = 0; t < m; ++t) {
            const std::size_t node = members[perm[t]];
            if (t < n_train) split.train.push_back(node);
            else if (t < n_train + n_val) split.val.push_back(node);
            else split.test.push_back(node);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());

    g.labels = std::move(labels);
    g.split = std::move(split);
    g.validate();
    return g;
}

}  // namespace xgoal
