#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Connection coefficients Γ^k_ij at a point, k-major storage.
class Christoffel {
public:
    Christoffel() = default;
    explicit Christoffel(int n) : n_(n), a_(static_cast<size_t>(n) * n * n, 0.0) {}

    int dim() const { return n_; }
    double& operator()(int k, int i, int j) { return a_[idx(k, i, j)]; }
    double operator()(int k, int i, int j) const { return a_[idx(k, i, j)]; }

    Christoffel& operator+=(const Christoffel& o) {
        for (size_t p = 0; p < a_.size(); ++p) a_[p] += o.a_[p];
        return *this;
    }
    Christoffel& operator*=(double c) {
        for (double& v : a_) v *= c;
        return *this;
    }
    friend Christoffel operator*(double c, Christoffel g) { return g *= c; }
    friend Christoffel operator+(Christoffel a, const Christoffel& b) { return a += b; }
    friend Christoffel operator-(const Christoffel& a, const Christoffel& b) {
        Christoffel r = a;
        for (size_t p = 0; p < r.a_.size(); ++p) r.a_[p] -= b.a_[p];
        return r;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }
    double symmetry_defect() const {
        double m = 0.0;
        for (int k = 0; k < n_; ++k)
            for (int i = 0; i < n_; ++i)
                for (int j = i + 1; j < n_; ++j)
                    m = std::max(m, std::abs((*this)(k, i, j) - (*this)(k, j, i)));
        return m;
    }

private:
    size_t idx(int k, int i, int j) const {
        return (static_cast<size_t>(k) * n_ + i) * n_ + j;
    }
    int n_ = 0;
    std::vector<double> a_;
};

/// Curvature tensor R^l_kij at a point: R(∂i,∂j)∂k = R^l_kij ∂l.
class Riemann {
public:
    Riemann() = default;
    explicit Riemann(int n) : n_(n), a_(static_cast<size_t>(n) * n * n * n, 0.0) {}

    int dim() const { return n_; }
    double& operator()(int l, int k, int i, int j) { return a_[idx(l, k, i, j)]; }
    double operator()(int l, int k, int i, int j) const { return a_[idx(l, k, i, j)]; }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    size_t idx(int l, int k, int i, int j) const {
        return ((static_cast<size_t>(l) * n_ + k) * n_ + i) * n_ + j;
    }
    int n_ = 0;
    std::vector<double> a_;
};

/// Fixed-order pairwise summation; deterministic and more accurate than naive
/// accumulation on long grids.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

/// Deterministic RNG used for sample points and loop generation. Distributions
/// are hand-rolled so that a seed pins the byte stream independent of the
/// standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        // xorshift* keeps the report bytes reproducible across platforms
        s_ ^= s_ >> 12;
        s_ ^= s_ << 25;
        s_ ^= s_ >> 27;
        return s_ * 0x2545f4914f6cdd1dull;
    }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

private:
    uint64_t s_;
};

constexpr double kPi = 3.14159265358979323846;

inline bool approx_eq(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace diffgeo
