#pragma once

#include "xgoal/graphdata.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

namespace fixtures {

inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("xgoal_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// ACM-shaped bundle: 3,025 nodes, PSP and PAP layers, 1,830 binary attributes,
// 600 labeled nodes in 3 classes. Structure is random; only the shape is real.
inline std::filesystem::path acm_shaped_bundle(const std::string& name) {
    namespace fs = std::filesystem;
    const auto dir = scratch(name);
    const std::size_t n = 3025, d = 1830;
    xgoal::Rng rng(1234);
    nlohmann::json meta{{"n_nodes", n}, {"attr_dim", d}, {"attr_format", "bin"},
                        {"layers", {{{"name", "PSP"}}, {{"name", "PAP"}}}}};
    std::ofstream(dir / "meta.json") << meta.dump();
    xgoal::DenseMatrix x(n, d);
    for (double& v : x.data) v = rng.uniform() < 0.01 ? 1.0 : 0.0;
    xgoal::save_matrix_f32((dir / "attributes.bin").string(), x);
    for (const char* layer : {"PSP", "PAP"}) {
        std::ofstream os(dir / (std::string("edges-") + layer + ".tsv"));
        for (std::size_t e = 0; e < 4 * n; ++e) os << rng.uniform_int(n) << '\t' << rng.uniform_int(n) << '\n';
    }
    std::ofstream labels(dir / "labels.tsv");
    nlohmann::json split{{"train", nlohmann::json::array()}, {"val", nlohmann::json::array()}, {"test", nlohmann::json::array()}};
    for (std::size_t i = 0; i < 600; ++i) {
        const std::size_t node = i * 5;
        labels << node << '\t' << i % 3 << '\n';
        split[i < 60 ? "train" : i < 120 ? "val" : "test"].push_back(node);
    }
    std::ofstream(dir / "split.json") << split.dump();
    return dir;
}

}  // namespace fixtures
