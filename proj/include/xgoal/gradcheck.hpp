#pragma once

#include "xgoal/cluster.hpp"
#include "xgoal/encoder.hpp"
#include "xgoal/objective.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace xgoal {

// Small fixed multiplex instance with every stochastic piece (dropout masks,
// shuffles, cluster assignments) drawn once and frozen.
struct GradcheckInstance {
    std::vector<SparseMatrix> adjacency;
    DenseMatrix x;
    std::vector<EncoderParams> params;
    std::vector<LayerBatch> batches;
    std::vector<ClusterModel> models;
};

struct GradcheckShape {
    std::size_t n = 12;
    std::size_t d_x = 7;
    std::size_t d = 5;
    std::vector<std::size_t> k{3, 4};  // one entry per layer
    double tau = 0.2;
};

// Batches point into the instance's own adjacency and x, hence the heap allocation.
std::unique_ptr<GradcheckInstance> make_gradcheck_instance(std::uint64_t seed, const GradcheckShape& shape = {});

struct TermCheck {
    std::string term;
    double max_rel_error = 0.0;
    std::string worst_entry;
    std::size_t entries = 0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<TermCheck> terms;
    bool pass = false;
};

inline constexpr double kGradcheckTolerance = 1e-4;
inline constexpr double kGradcheckStep = 1e-4;

// |a - f| / max(|a|, |f|, 1e-8), f from the five-point central stencil.
double relative_error(double analytic, double numeric);

// Encoder backward, then L_N, L_C, R_N, R_C and L_X each isolated by its
// weight and differentiated with respect to every encoder parameter.
GradcheckReport run_gradcheck(std::uint64_t seed, std::optional<Term> fault = std::nullopt,
                              double tolerance = kGradcheckTolerance);

}  // namespace xgoal
