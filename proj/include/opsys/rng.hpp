#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "opsys/cmatrix.hpp"

namespace opsys {

// splitmix64: stable across platforms, named in report headers.
class Rng {
  public:
    static constexpr const char* kName = "splitmix64";

    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Complex cgaussian() { return Complex(gaussian(), gaussian()); }

    CMatrix complex_matrix(int rows, int cols) {
        CMatrix m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = cgaussian();
        return m;
    }

    CMatrix hermitian(int dim) {
        CMatrix g = complex_matrix(dim, dim);
        return 0.5 * (g + g.adjoint());
    }

    CMatrix psd(int dim) {
        CMatrix g = complex_matrix(dim, dim);
        return g * g.adjoint() / static_cast<double>(dim);
    }

    CMatrix unitary(int dim) {
        CMatrix g = complex_matrix(dim, dim);
        Eigen::HouseholderQR<CMatrix> qr(g);
        CMatrix q = qr.householderQ();
        CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < dim; ++i) {
            Complex d = r(i, i);
            double a = std::abs(d);
            q.col(i) *= (a > 0 ? d / a : Complex(1, 0));
        }
        return q;
    }

    CMatrix isometry(int rows, int cols) {  // rows >= cols, V*V = I
        return unitary(rows).leftCols(cols);
    }

  private:
    std::uint64_t state_;
};

}  // namespace opsys
