#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xgoal {

// Raised when a caller breaks an operation's preconditions.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kFloor = 1e-12;

struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values);

    static DenseMatrix identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const DenseMatrix&) const = default;
};

// Compressed sparse row storage.
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> indices;
    std::vector<double> values;

    struct Triplet {
        std::size_t row;
        std::size_t col;
        double value;
    };

    // Duplicate (row, col) pairs are summed.
    static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
    static SparseMatrix identity(std::size_t n);
    static SparseMatrix zeros(std::size_t rows, std::size_t cols);

    std::size_t nnz() const { return values.size(); }
    double at(std::size_t i, std::size_t j) const;
    DenseMatrix to_dense() const;
    void validate() const;

    bool operator==(const SparseMatrix&) const = default;
};

// SplitMix64 over a Weyl counter: draw i is mix(seed + (i + 1) * 0x9E3779B97F4A7C15).
// Every derived quantity below uses only integer ops plus IEEE +,*,log,sqrt,cos.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n), rejection sampled (no modulo bias).
    std::uint64_t uniform_int(std::uint64_t n);
    // Box-Muller, one draw per call (the sine branch is discarded).
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    // Uniform permutation of [0, n) by Fisher-Yates, swapping from the back.
    std::vector<std::size_t> permutation(std::size_t n);

    // Independent stream keyed by (seed, stream id); does not advance this generator.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    static std::uint64_t mix(std::uint64_t z);

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// aᵀ·b without materializing the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b);

DenseMatrix softmax_rows(const DenseMatrix& m, double tau);
void softmax_inplace(std::span<double> logits);

double kl_div(std::span<const double> p, std::span<const double> q);
double dot(std::span<const double> u, std::span<const double> v);
double norm2(std::span<const double> u);
double cosine(std::span<const double> u, std::span<const double> v);

double frobenius(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);
bool all_finite(const DenseMatrix& a);

// Binary format: two little-endian u64 (rows, cols), then row-major payload.
void write_matrix_f32(std::ostream& os, const DenseMatrix& m);
void write_matrix_f64(std::ostream& os, const DenseMatrix& m);
DenseMatrix read_matrix_f32(std::istream& is);
DenseMatrix read_matrix_f64(std::istream& is);
void save_matrix_f32(const std::string& path, const DenseMatrix& m);
DenseMatrix load_matrix_f32(const std::string& path);

}  // namespace xgoal
