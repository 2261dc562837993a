#pragma once

#include "xgoal/graphdata.hpp"
#include "xgoal/numkit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace xgoal {

struct F1Scores {
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    std::vector<double> per_class;
};

// confusion[t][p] counts test nodes of true class t predicted as p. Classes
// with neither support nor predictions are left out of the macro mean.
F1Scores f1_from_confusion(const std::vector<std::vector<std::size_t>>& confusion);

struct ClassifierOptions {
    std::size_t iterations = 300;
    double step = 0.1;
    double l2 = 1e-4;
};

// Multinomial logistic regression on the train split, scored on the test split.
F1Scores classify(const DenseMatrix& h, const std::vector<int>& labels, const Split& split,
                  const ClassifierOptions& opts = {});

// I(a; b) / sqrt(H(a) H(b)) with natural logs; 0 when either side has zero entropy.
double nmi(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

// K-means on the labeled rows, NMI against their labels.
double cluster_eval(const DenseMatrix& h, const std::vector<int>& labels, std::size_t k, Rng& rng);

// Mean fraction of each labeled node's 5 cosine-nearest labeled neighbours
// sharing its label. Ties go to the lower node id.
double sim_search(const DenseMatrix& h, const std::vector<int>& labels);

struct EvalReport {
    std::optional<double> macro_f1;
    std::optional<double> micro_f1;
    std::optional<double> nmi;
    std::optional<double> sim_at_5;
    std::vector<double> per_class_f1;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    std::size_t k = 0;

    std::string to_json() const;
    // Fixed-width table: one row, columns MaF1 MiF1 NMI Sim@5.
    std::string table(const std::string& row_label) const;
};

}  // namespace xgoal
