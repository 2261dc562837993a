#pragma once

#include "xgoal/numkit.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace xgoal {

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Layer {
    std::string name;
    SparseMatrix adjacency_raw;   // symmetric, nonnegative
    SparseMatrix adjacency_norm;  // D^-1/2 A D^-1/2
    std::size_t k_clusters = 10;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

struct MultiplexGraph {
    std::size_t n_nodes = 0;
    std::vector<Layer> layers;
    DenseMatrix attributes;
    std::optional<std::vector<int>> labels;  // -1 marks an unlabeled node
    std::optional<Split> split;

    std::size_t attr_dim() const { return attributes.cols; }
    std::size_t num_layers() const { return layers.size(); }
    std::size_t num_classes() const;
    const Layer& layer(const std::string& name) const;

    // Throws ContractViolation on any broken invariant.
    void validate() const;
};

Layer make_layer(std::string name, SparseMatrix raw, std::size_t k_clusters);

// D^-1/2 A D^-1/2 without self-loops; zero-degree rows stay zero.
SparseMatrix normalize_adjacency(const SparseMatrix& a);

// Bundle directory: meta.json, attributes.tsv|attributes.bin, edges-<name>.tsv,
// optional labels.tsv and split.json.
MultiplexGraph load_bundle(const std::string& dir);
void save_bundle(const MultiplexGraph& g, const std::string& dir);

struct SynthSpec {
    std::size_t n_nodes = 200;
    std::size_t n_layers = 2;
    std::size_t n_communities = 3;
    double p_in = 0.1;
    double p_out = 0.01;
    std::size_t attr_dim = 32;
    double noise = 0.1;
};

// Planted-partition multiplex graph: communities shared by every layer,
// attributes = community indicator centroid + N(0, noise^2).
MultiplexGraph generate_synthetic(const SynthSpec& spec, Rng& rng);

}  // namespace xgoal
