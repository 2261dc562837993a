#include "oracles.hpp"
#include "xgoal/evalkit.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>

using namespace xgoal;

namespace {

// Brute-force Sim@5: full sort of every labeled pair by (similarity desc, id asc).
double sim_oracle(const DenseMatrix& h, const std::vector<int>& labels) {
    long double total = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < h.rows; ++i) {
        if (labels[i] < 0) continue;
        std::vector<std::pair<long double, std::size_t>> all;
        for (std::size_t j = 0; j < h.rows; ++j)
            if (j != i && labels[j] >= 0) all.push_back({oracle::cos_ld(h, i, h, j), j});
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        int hits = 0;
        for (int t = 0; t < 5; ++t) hits += labels[all[t].second] == labels[i];
        total += hits / 5.0L;
        ++count;
    }
    return static_cast<double>(total / count);
}

}  // namespace

TEST_CASE("F1 from a confusion matrix") {
    const auto s = f1_from_confusion({{5, 1}, {2, 4}});
    CHECK(s.macro_f1 == doctest::Approx(0.7482517482517483).epsilon(1e-15));
    CHECK(s.micro_f1 == doctest::Approx(9.0 / 12).epsilon(1e-15));
    const auto perfect = f1_from_confusion({{3, 0, 0}, {0, 2, 0}, {0, 0, 4}});
    CHECK(perfect.macro_f1 == 1.0);
    CHECK(perfect.micro_f1 == 1.0);
    // A class with neither support nor predictions is left out of the mean.
    const auto absent = f1_from_confusion({{3, 0, 0}, {0, 2, 0}, {0, 0, 0}});
    CHECK(absent.macro_f1 == 1.0);
    CHECK_THROWS_AS(f1_from_confusion({{1, 2}, {3}}), ContractViolation);
}

TEST_CASE("classifier separates a linearly separable problem") {
    Rng rng(1);
    const std::size_t n = 80;
    DenseMatrix h(n, 3);
    std::vector<int> labels(n);
    Split split;
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        h(i, 0) = (labels[i] ? 1.0 : -1.0) + 0.1 * rng.normal();
        h(i, 1) = rng.normal();
        h(i, 2) = rng.normal();
        (i < 20 ? split.train : i < 30 ? split.val : split.test).push_back(i);
    }
    const auto s = classify(h, labels, split);
    CHECK(s.macro_f1 == 1.0);
    CHECK(s.micro_f1 == 1.0);

    // Uninformative embeddings on a balanced problem: chance-level accuracy.
    const auto flat = classify(DenseMatrix(n, 3), labels, split);
    CHECK(flat.micro_f1 >= 0.3);
    CHECK(flat.micro_f1 <= 0.7);

    // Permuting node ids (with the split relabeled to match) does not change the score.
    const auto perm = rng.permutation(n);
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
    DenseMatrix hp(n, 3);
    std::vector<int> lp(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 3; ++j) hp(i, j) = h(perm[i], j);
        lp[i] = labels[perm[i]];
    }
    Split sp;
    for (std::size_t i : split.train) sp.train.push_back(inv[i]);
    for (std::size_t i : split.test) sp.test.push_back(inv[i]);
    CHECK(classify(hp, lp, sp).macro_f1 == s.macro_f1);
}

TEST_CASE("classifier rejects a test class missing from training") {
    const DenseMatrix h(4, 2);
    const std::vector<int> labels{0, 0, 1, 1};
    Split split;
    split.train = {0, 1};
    split.test = {2, 3};
    try {
        classify(h, labels, split);
        FAIL("expected rejection");
    } catch (const ContractViolation& e) {
        CHECK(std::string(e.what()).find("class 1 absent from train split") != std::string::npos);
    }
}

TEST_CASE("NMI cases") {
    const std::vector<std::size_t> a{0, 0, 0, 1, 1, 1};
    CHECK(nmi(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nmi(a, {5, 5, 5, 2, 2, 2}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nmi(a, {0, 0, 1, 1, 2, 2}) == doctest::Approx(0.5295405780575618).epsilon(1e-14));
    CHECK(std::abs(nmi({0, 0, 1, 1}, {0, 1, 0, 1})) <= 1e-15);
    CHECK(nmi(a, {3, 3, 3, 3, 3, 3}) == 0.0);
    CHECK_THROWS_AS(nmi(a, {0, 1}), ContractViolation);

    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::size_t> x(30), y(30);
        for (auto& v : x) v = rng.uniform_int(4);
        for (auto& v : y) v = rng.uniform_int(3);
        const double s = nmi(x, y);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(s == doctest::Approx(nmi(y, x)).epsilon(1e-14));
    }
}

TEST_CASE("cluster evaluation recovers well-separated groups") {
    Rng rng(3);
    const std::size_t n = 45;
    DenseMatrix h(n, 2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 3);
        h(i, 0) = 5.0 * (i % 3) + 0.05 * rng.normal();
        h(i, 1) = 0.05 * rng.normal();
    }
    CHECK(cluster_eval(h, labels, 3, rng) == doctest::Approx(1.0).epsilon(1e-12));
    // Unlabeled rows are ignored even when they sit in the way.
    labels[0] = -1;
    h(0, 0) = 100.0;
    CHECK(cluster_eval(h, labels, 3, rng) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity search") {
    Rng rng(4);
    const DenseMatrix h = oracle::random_matrix(10, 3, rng);
    CHECK(sim_search(h, std::vector<int>(10, 2)) == 1.0);
    CHECK_THROWS_AS(sim_search(h, {0, 0, 1, 1, 0, -1, -1, -1, -1, -1}), ContractViolation);

    // Two antipodal groups: every top-5 list stays in-group.
    DenseMatrix g(12, 2);
    std::vector<int> gl(12);
    for (std::size_t i = 0; i < 12; ++i) {
        gl[i] = i < 6 ? 0 : 1;
        g(i, 0) = (i < 6 ? 1.0 : -1.0) + 0.01 * rng.normal();
        g(i, 1) = 0.01 * rng.normal();
    }
    CHECK(sim_search(g, gl) == 1.0);

    // Identical rows: ties resolved towards lower ids.
    DenseMatrix same(8, 2, std::vector<double>(16, 1.0));
    const std::vector<int> sl{0, 0, 0, 1, 1, 1, 1, 1};
    // Node 0..2 (class 0): neighbours are the 5 lowest other ids -> 2 of class 0.
    // Node 3..7 (class 1): neighbours are ids {0,1,2,...} -> 2 of class 1.
    const double want = (3 * (2.0 / 5) + 5 * (2.0 / 5)) / 8;
    CHECK(sim_search(same, sl) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("similarity search matches the brute-force oracle and its invariances") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const DenseMatrix h = oracle::random_matrix(8, 3, rng);
        std::vector<int> labels(8);
        for (auto& l : labels) l = static_cast<int>(rng.uniform_int(2));
        const double s = sim_search(h, labels);
        CHECK(s == doctest::Approx(sim_oracle(h, labels)).epsilon(1e-15));

        // Positive rescaling of rows.
        DenseMatrix scaled = h;
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 3; ++j) scaled(i, j) *= 0.5 + i;
        CHECK(sim_search(scaled, labels) == s);

        // Rotation in the first two coordinates.
        const double c = std::cos(0.7), sn = std::sin(0.7);
        DenseMatrix rot = h;
        for (std::size_t i = 0; i < 8; ++i) {
            rot(i, 0) = c * h(i, 0) - sn * h(i, 1);
            rot(i, 1) = sn * h(i, 0) + c * h(i, 1);
        }
        CHECK(sim_search(rot, labels) == s);
    }
}

TEST_CASE("report serialization and table") {
    EvalReport r;
    r.macro_f1 = 0.5;
    r.sim_at_5 = 0.25;
    r.seed = 3;
    r.k = 4;
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["macro_f1"] == 0.5);
    CHECK(j["nmi"].is_null());
    CHECK(j["config"]["k"] == 4);
    const auto t = r.table("X-GOAL");
    CHECK(t.find("MaF1") != std::string::npos);
    CHECK(t.find("0.500") != std::string::npos);
    CHECK(t.find("0.250") != std::string::npos);
}
