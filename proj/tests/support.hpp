#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "opscale/cpmap.hpp"

namespace testing {

using opscale::Complex;
using opscale::CPMap;
using opscale::Index;
using opscale::Matrix;
using opscale::RealVector;

using Rng = std::mt19937_64;

inline double gauss(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline long uniform_int(Rng& rng, long lo, long hi) {
  return std::uniform_int_distribution<long>(lo, hi)(rng);
}

inline Matrix random_complex(Rng& rng, Index rows, Index cols) {
  Matrix x(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) x(i, j) = Complex(gauss(rng), gauss(rng));
  }
  return x;
}

inline Matrix random_hermitian(Rng& rng, Index n) {
  const Matrix x = random_complex(rng, n, n);
  return (x + x.adjoint()) / 2.0;
}

// Well-conditioned positive definite matrix.
inline Matrix random_pd(Rng& rng, Index n) {
  const Matrix x = random_complex(rng, n, n);
  return x * x.adjoint() / static_cast<double>(n) + Matrix::Identity(n, n) * 0.5;
}

inline Matrix random_psd(Rng& rng, Index n, Index rank) {
  const Matrix x = random_complex(rng, n, rank);
  return x * x.adjoint();
}

// Upper triangular with diagonal entries of modulus in [0.5, 2].
inline Matrix random_upper(Rng& rng, Index n) {
  Matrix h = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double r = uniform(rng, 0.5, 2.0);
    const double phase = uniform(rng, 0.0, 2.0 * M_PI);
    h(i, i) = std::polar(r, phase);
    for (Index j = i + 1; j < n; ++j) h(i, j) = Complex(gauss(rng), gauss(rng)) * 0.5;
  }
  return h;
}

inline CPMap random_map(Rng& rng, Index m, Index n, std::size_t r) {
  std::vector<Matrix> kraus;
  for (std::size_t i = 0; i < r; ++i) kraus.push_back(random_complex(rng, m, n));
  return CPMap(std::move(kraus));
}

// Nonincreasing positive vector with entries >= floor, scaled to the given sum.
inline RealVector random_spectrum(Rng& rng, Index k, double floor, double total) {
  RealVector v(k);
  for (Index i = 0; i < k; ++i) v[i] = uniform(rng, 0.0, 1.0);
  std::sort(v.data(), v.data() + k, std::greater<>());
  v /= v.sum();
  // Mix with the uniform vector so that the smallest entry is at least floor * total.
  const double t = std::min(1.0, floor * static_cast<double>(k));
  v = (1.0 - t) * v + RealVector::Constant(k, t / static_cast<double>(k));
  return v * total;
}

inline RealVector eigenvalues_desc(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  RealVector ev = es.eigenvalues();
  return ev.reverse();
}

inline double min_eigenvalue(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_upper(const Matrix& x, double tol = 0.0) {
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < i && j < x.cols(); ++j) {
      if (std::abs(x(i, j)) > tol) return false;
    }
  }
  return true;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testing
