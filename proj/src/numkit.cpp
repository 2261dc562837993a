#include "xgoal/numkit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

namespace xgoal {

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
        throw ContractViolation("DenseMatrix: data length " + std::to_string(data.size()) + " != " +
                                std::to_string(rows) + "x" + std::to_string(cols));
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols) throw ContractViolation("SparseMatrix: triplet out of range");
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix s;
    s.rows = rows;
    s.cols = cols;
    s.offsets.assign(rows + 1, 0);
    for (std::size_t k = 0; k < triplets.size(); ++k) {
        const auto& t = triplets[k];
        if (!s.indices.empty() && k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
            s.values.back() += t.value;
            continue;
        }
        s.indices.push_back(t.col);
        s.values.push_back(t.value);
        ++s.offsets[t.row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) s.offsets[i + 1] += s.offsets[i];
    return s;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
}

SparseMatrix SparseMatrix::zeros(std::size_t rows, std::size_t cols) {
    SparseMatrix s;
    s.rows = rows;
    s.cols = cols;
    s.offsets.assign(rows + 1, 0);
    return s;
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    auto first = indices.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
    auto last = indices.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - indices.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
    DenseMatrix d(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) d(i, indices[k]) = values[k];
    return d;
}

void SparseMatrix::validate() const {
    if (offsets.size() != rows + 1 || offsets.front() != 0 || offsets.back() != values.size() ||
        indices.size() != values.size()) {
        throw ContractViolation("SparseMatrix: malformed offsets");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (offsets[i] > offsets[i + 1]) throw ContractViolation("SparseMatrix: offsets not monotone");
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            if (indices[k] >= cols) throw ContractViolation("SparseMatrix: column index out of range");
            if (k > offsets[i] && indices[k] <= indices[k - 1])
                throw ContractViolation("SparseMatrix: column indices not strictly increasing");
        }
    }
}

std::uint64_t Rng::mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) throw ContractViolation("Rng::uniform_int: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

Rng Rng::fork(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0xD1B54A32D192ED03ULL))); }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw ContractViolation("matmul: inner dimensions differ");
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* out = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows) throw ContractViolation("matmul_tn: row counts differ");
    DenseMatrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* brow = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* out = c.data.data() + i * c.cols;
            for (std::size_t j = 0; j < b.cols; ++j) out[j] += aki * brow[j];
        }
    }
    return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw ContractViolation("spmm: a.cols != b.rows");
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* out = c.data.data() + i * c.cols;
        for (std::size_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
            const double v = a.values[k];
            const double* brow = b.data.data() + a.indices[k] * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) out[j] += v * brow[j];
        }
    }
    return c;
}

void softmax_inplace(std::span<double> logits) {
    if (logits.empty()) return;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - mx);
        sum += z;
    }
    for (double& z : logits) z /= sum;
}

DenseMatrix softmax_rows(const DenseMatrix& m, double tau) {
    if (!(tau > 0.0)) throw ContractViolation("softmax_rows: tau must be positive");
    DenseMatrix out = m;
    for (double& v : out.data) v /= tau;
    for (std::size_t i = 0; i < out.rows; ++i) softmax_inplace(out.row(i));
    return out;
}

double kl_div(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ContractViolation("kl_div: length mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] <= 0.0) continue;
        s += p[k] * std::log(p[k] / std::max(q[k], kFloor));
    }
    return std::max(s, 0.0);
}

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ContractViolation("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double norm2(std::span<const double> u) { return std::sqrt(dot(u, u)); }

double cosine(std::span<const double> u, std::span<const double> v) {
    const double nu = std::max(norm2(u), kFloor);
    const double nv = std::max(norm2(v), kFloor);
    return dot(u, v) / (nu * nv);
}

double frobenius(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

bool all_finite(const DenseMatrix& a) {
    return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void write_header(std::ostream& os, const DenseMatrix& m) {
    const std::uint64_t hdr[2] = {m.rows, m.cols};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
}

std::pair<std::size_t, std::size_t> read_header(std::istream& is) {
    std::uint64_t hdr[2] = {0, 0};
    if (!is.read(reinterpret_cast<char*>(hdr), sizeof(hdr))) throw std::runtime_error("matrix: truncated header");
    return {static_cast<std::size_t>(hdr[0]), static_cast<std::size_t>(hdr[1])};
}

}  // namespace

void write_matrix_f32(std::ostream& os, const DenseMatrix& m) {
    write_header(os, m);
    std::vector<float> buf(m.data.begin(), m.data.end());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void write_matrix_f64(std::ostream& os, const DenseMatrix& m) {
    write_header(os, m);
    os.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

DenseMatrix read_matrix_f32(std::istream& is) {
    auto [r, c] = read_header(is);
    std::vector<float> buf(r * c);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
        throw std::runtime_error("matrix: truncated f32 payload");
    return DenseMatrix(r, c, std::vector<double>(buf.begin(), buf.end()));
}

DenseMatrix read_matrix_f64(std::istream& is) {
    auto [r, c] = read_header(is);
    DenseMatrix m(r, c);
    if (!is.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double))))
        throw std::runtime_error("matrix: truncated f64 payload");
    return m;
}

void save_matrix_f32(const std::string& path, const DenseMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_matrix_f32(os, m);
}

DenseMatrix load_matrix_f32(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_matrix_f32(is);
}

}  // namespace xgoal
