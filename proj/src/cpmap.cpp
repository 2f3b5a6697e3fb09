#include "opscale/cpmap.hpp"

#include <cmath>
#include <string>

namespace opscale {

namespace {

void require_square(const Matrix& x, Index dim, const char* what) {
  if (x.rows() != dim || x.cols() != dim) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(dim) +
                         "x" + std::to_string(dim) + ", got " +
                         std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
}

void check_monotone(const RealVector& v, const BlockSizes& blocks, const char* name) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0) {
      throw std::invalid_argument(std::string(name) + "[" + std::to_string(i) +
                                  "] must be finite and nonnegative");
    }
  }
  for (const auto& b : block_ranges(blocks, v.size())) {
    for (Index i = b.offset + 1; i < b.offset + b.size; ++i) {
      if (v[i] > v[i - 1]) {
        throw std::invalid_argument(std::string(name) +
                                    " must be nonincreasing within each block");
      }
    }
  }
}

}  // namespace

CPMap::CPMap(std::vector<Matrix> kraus) : kraus_(std::move(kraus)) {
  if (kraus_.empty()) throw std::invalid_argument("CPMap needs at least one Kraus operator");
  m_ = kraus_.front().rows();
  n_ = kraus_.front().cols();
  if (m_ == 0 || n_ == 0) throw DimensionError("Kraus operators must be nonempty");
  for (std::size_t i = 0; i < kraus_.size(); ++i) {
    const Matrix& a = kraus_[i];
    if (a.rows() != m_ || a.cols() != n_) {
      throw DimensionError("Kraus operator " + std::to_string(i) +
                           " has a different shape");
    }
    if (!a.allFinite()) {
      throw std::invalid_argument("Kraus operator " + std::to_string(i) +
                                  " has non-finite entries");
    }
  }
}

std::vector<BlockRange> block_ranges(const BlockSizes& sizes, Index dim) {
  if (sizes.empty()) return {BlockRange{0, dim}};
  std::vector<BlockRange> out;
  out.reserve(sizes.size());
  Index offset = 0;
  for (Index s : sizes) {
    if (s <= 0) throw DimensionError("block sizes must be positive");
    out.push_back({offset, s});
    offset += s;
  }
  if (offset != dim) {
    throw DimensionError("block sizes sum to " + std::to_string(offset) +
                         ", expected " + std::to_string(dim));
  }
  return out;
}

MarginalSpec::MarginalSpec(RealVector p, RealVector q, BlockStructure blocks)
    : p_(std::move(p)), q_(std::move(q)), blocks_(std::move(blocks)) {
  if (p_.size() == 0 || q_.size() == 0) throw DimensionError("empty marginal spectrum");
  check_monotone(p_, blocks_.cols, "p");
  check_monotone(q_, blocks_.rows, "q");
}

Matrix MarginalSpec::P() const { return p_.cast<Complex>().asDiagonal(); }
Matrix MarginalSpec::Q() const { return q_.cast<Complex>().asDiagonal(); }

MarginalSpec MarginalSpec::scaled(double c) const {
  return MarginalSpec(p_ * c, q_ * c, blocks_);
}

Matrix apply(const CPMap& t, const Matrix& x) {
  require_square(x, t.cols(), "apply");
  Matrix out = Matrix::Zero(t.rows(), t.rows());
  Matrix tmp(t.rows(), t.cols());
  for (const Matrix& a : t.kraus()) {
    tmp.noalias() = a * x;
    out.noalias() += tmp * a.adjoint();
  }
  return symmetrize(out);
}

Matrix dual_apply(const CPMap& t, const Matrix& y) {
  require_square(y, t.rows(), "dual_apply");
  Matrix out = Matrix::Zero(t.cols(), t.cols());
  Matrix tmp(t.cols(), t.rows());
  for (const Matrix& a : t.kraus()) {
    tmp.noalias() = a.adjoint() * y;
    out.noalias() += tmp * a;
  }
  return symmetrize(out);
}

CPMap scale(const CPMap& t, const ScalingPair& s) {
  require_square(s.g, t.rows(), "scale (g)");
  require_square(s.h, t.cols(), "scale (h)");
  std::vector<Matrix> kraus;
  kraus.reserve(t.size());
  const Matrix gd = s.g.adjoint();
  for (const Matrix& a : t.kraus()) kraus.push_back(gd * a * s.h);
  return CPMap(std::move(kraus));
}

std::pair<Matrix, Matrix> marginals(const CPMap& t, const MarginalSpec& spec) {
  if (spec.n() != t.cols() || spec.m() != t.rows()) {
    throw DimensionError("marginal spectra do not match the map's shape");
  }
  std::pair<Matrix, Matrix> out;
  out.first = opscale::apply(t, spec.P());
  out.second = dual_apply(t, spec.Q());
  return out;
}

Matrix balance_factor(const Matrix& s, const BlockSizes& blocks) {
  if (s.rows() != s.cols()) throw DimensionError("balance_factor: S must be square");
  const Index dim = s.rows();
  const double floor = kSingularFloor * s.trace().real() / static_cast<double>(dim);

  Matrix g = Matrix::Zero(dim, dim);
  for (const auto& b : block_ranges(blocks, dim)) {
    const Matrix sb = symmetrize(s.block(b.offset, b.offset, b.size, b.size));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sb, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    if (!(lo > floor)) throw NotPositiveDefinite(lo);
    Eigen::LLT<Matrix> llt(sb);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite(lo);
    // L^† g_b = I with L^† upper triangular.
    Matrix gb = Matrix::Identity(b.size, b.size);
    llt.matrixU().solveInPlace(gb);
    g.block(b.offset, b.offset, b.size, b.size) = gb;
  }
  return g;
}

bool is_block_diagonal(const CPMap& t, const BlockStructure& blocks) {
  const auto rows = block_ranges(blocks.rows, t.rows());
  const auto cols = block_ranges(blocks.cols, t.cols());
  for (const Matrix& a : t.kraus()) {
    int occupied = 0;
    for (const auto& rb : rows) {
      for (const auto& cb : cols) {
        if (a.block(rb.offset, cb.offset, rb.size, cb.size).cwiseAbs().maxCoeff() > 0.0) {
          ++occupied;
        }
      }
    }
    if (occupied > 1) return false;
  }
  return true;
}

double inverse_condition(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0.0;
  return sv[sv.size() - 1] / sv[0];
}

}  // namespace opscale
