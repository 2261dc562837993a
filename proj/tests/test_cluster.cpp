#include "oracles.hpp"
#include "xgoal/cluster.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace xgoal;

namespace {

void check_consistent(const DenseMatrix& h, const ClusterModel& m) {
    for (std::size_t k = 0; k < m.k(); ++k) {
        std::vector<double> mean(h.cols, 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < h.rows; ++i)
            if (m.assignments[i] == k) {
                ++count;
                for (std::size_t j = 0; j < h.cols; ++j) mean[j] += h(i, j);
            }
        REQUIRE(count > 0);
        for (std::size_t j = 0; j < h.cols; ++j) CHECK(std::abs(mean[j] / count - m.centers(k, j)) <= 1e-9);
    }
}

// Same partition up to relabeling.
bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::map<std::size_t, std::size_t> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto [it1, ins1] = ab.emplace(a[i], b[i]);
        auto [it2, ins2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("k = N puts every point in its own cluster") {
    Rng rng(1);
    const DenseMatrix h = oracle::random_matrix(6, 3, rng);
    const auto m = kmeans(h, 6, rng);
    CHECK(m.inertia == 0.0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(m.centers(m.assignments[i], j) == h(i, j));
}

TEST_CASE("two pairs of identical points") {
    const DenseMatrix h(4, 2, {1, 1, 1, 1, -3, 2, -3, 2});
    Rng rng(2);
    const auto m = kmeans(h, 2, rng);
    CHECK(m.inertia == 0.0);
    CHECK(m.assignments[0] == m.assignments[1]);
    CHECK(m.assignments[2] == m.assignments[3]);
    CHECK(m.assignments[0] != m.assignments[2]);
    CHECK(m.centers(m.assignments[2], 0) == -3.0);
}

TEST_CASE("three tight blobs are recovered") {
    Rng rng(9);
    const double centers[3][2] = {{0, 0}, {1, 0}, {0, 1}};
    DenseMatrix h(30, 2);
    std::vector<std::size_t> truth(30);
    for (std::size_t i = 0; i < 30; ++i) {
        truth[i] = i % 3;
        for (int j = 0; j < 2; ++j) h(i, j) = centers[i % 3][j] + 0.01 * rng.normal();
    }
    // Oracle: nearest true centroid for every point reproduces the blob labels.
    for (std::size_t i = 0; i < 30; ++i) {
        std::size_t best = 0;
        double bd = 1e300;
        for (std::size_t c = 0; c < 3; ++c) {
            const double d = std::pow(h(i, 0) - centers[c][0], 2) + std::pow(h(i, 1) - centers[c][1], 2);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        REQUIRE(best == truth[i]);
    }
    const auto m = kmeans(h, 3, rng);
    CHECK(same_partition(m.assignments, truth));
    check_consistent(h, m);
}

TEST_CASE("kmeans contract and determinism") {
    Rng rng(3);
    const DenseMatrix h = oracle::random_matrix(20, 4, rng);
    CHECK_THROWS_AS(kmeans(h, 21, rng), ContractViolation);
    CHECK_THROWS_AS(kmeans(h, 0, rng), ContractViolation);
    Rng a(10), b(10);
    CHECK(kmeans(h, 4, a) == kmeans(h, 4, b));
}

TEST_CASE("assignments and centers are mutually consistent, no empty clusters") {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 5 + rng.uniform_int(40);
        DenseMatrix h = oracle::random_matrix(n, 3, rng);
        // Duplicate rows stress the empty-cluster repair.
        for (std::size_t i = n / 2; i < n; ++i)
            for (std::size_t j = 0; j < 3; ++j) h(i, j) = h(0, j);
        const std::size_t k = 1 + rng.uniform_int(n / 2 + 1);
        const auto m = kmeans(h, k, rng);
        m.validate();
        check_consistent(h, m);
    }
}

TEST_CASE("inertia never increases across Lloyd iterations") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const DenseMatrix h = oracle::random_matrix(60, 4, rng);
        std::vector<double> trace;
        lloyd(h, kmeans_pp_init(h, 6, rng), 300, &trace);
        REQUIRE(!trace.empty());
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
    }
}

TEST_CASE("assign_distribution analytic cases") {
    ClusterModel m;
    m.tau = 1.0;
    m.centers = DenseMatrix(2, 2, {1, 0, 0, 1});
    const std::vector<double> h{1, 0};
    const auto p = assign_distribution(h, m);
    CHECK(p[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1)).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(1 / (std::exp(1.0) + 1)).epsilon(1e-15));

    m.centers = DenseMatrix(3, 2, {0.5, 0.2, 0.5, 0.2, 0.5, 0.2});
    for (double v : assign_distribution(h, m)) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
    m.centers = DenseMatrix(1, 2, {4, -1});
    CHECK(assign_distribution(h, m) == std::vector<double>{1.0});
}

TEST_CASE("assign_distribution: tau rescaling paired with center rescaling") {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        ClusterModel m = oracle::random_model(1, 4, 5, rng, 0.1 + rng.uniform());
        const auto h = oracle::random_matrix(1, 5, rng).data;
        const auto p = assign_distribution(h, m);
        double sum = 0;
        for (double v : p) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        const double c = 0.1 + 5 * rng.uniform();
        ClusterModel s = m;
        s.tau *= c;
        for (double& v : s.centers.data) v *= c;
        const auto q = assign_distribution(h, s);
        for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p[k] - q[k]) <= 1e-12);
    }
}
