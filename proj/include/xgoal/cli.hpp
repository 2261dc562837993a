#pragma once

#include "xgoal/trainer.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace xgoal::cli {

enum ExitCode : int {
    kOk = 0,
    kVerificationFailed = 1,
    kInputError = 2,
    kDiverged = 3,
};

// Everything `xgoal train` resolves before running. Serialized as flat dotted keys,
// e.g. {"train.lr": 0.001, "cluster.k.PSP": 30, "loss.mu_c": 1.0}.
struct RunConfig {
    std::string data;
    std::string out;
    TrainConfig train;

    nlohmann::json to_json() const;
    // Keys absent from j keep the values already in *this; unknown keys throw.
    void apply_json(const nlohmann::json& j);
};

// Dispatches `args` (without the program name) to a subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xgoal::cli
