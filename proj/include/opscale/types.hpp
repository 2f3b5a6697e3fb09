#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace opscale {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

// Sizes of the diagonal blocks of a block-diagonal group. Empty means one
// block spanning the whole space.
using BlockSizes = std::vector<Index>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(double min_eigenvalue)
      : std::runtime_error("matrix is not positive definite (min eigenvalue " +
                           std::to_string(min_eigenvalue) + ")"),
        min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class NotInvertible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionTooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonIntegralSpectrum : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AllZeroSpectrum : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Returns (X + X^†) / 2.
inline Matrix symmetrize(const Matrix& x) { return (x + x.adjoint()) / 2.0; }

inline double frobenius(const Matrix& x) { return x.norm(); }

}  // namespace opscale
