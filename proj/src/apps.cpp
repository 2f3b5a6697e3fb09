#include "opscale/apps.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

namespace opscale {

namespace {

SolverConfig config_for(double epsilon, const AppOptions& opts) {
  SolverConfig cfg;
  cfg.epsilon = epsilon;
  cfg.max_iterations = opts.max_iterations;
  cfg.seed = opts.seed;
  cfg.mode = Mode::kGeneral;
  cfg.hard_cap = opts.hard_cap;
  return cfg;
}

ScalingPair from_identity_pair(const ScalingResult& res, const MarginalSpec& spec) {
  return res.form == PairForm::kFromIdentity ? res.pair : to_from_identity_form(res.pair, spec);
}

void require_equal_sums(double a, double b, const char* what) {
  if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) {
    throw std::invalid_argument(std::string(what) + ": totals differ (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

RealVector sorted_desc(RealVector v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

RealVector eigenvalues_desc(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(h), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().reverse();
}

BlockSizes ones(Index k) { return BlockSizes(static_cast<std::size_t>(k), 1); }

Matrix complex_gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) = Complex(re, im);
    }
  }
  return out;
}

}  // namespace

CPMap build_matrix_cpmap(const Eigen::MatrixXd& a) {
  if (a.size() == 0) throw DimensionError("empty matrix");
  std::vector<Matrix> kraus;
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      if (!std::isfinite(a(i, j)) || a(i, j) < 0.0) {
        throw std::invalid_argument("matrix entry (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ") must be finite and nonnegative");
      }
      if (a(i, j) == 0.0) continue;
      Matrix k = Matrix::Zero(a.rows(), a.cols());
      k(i, j) = std::sqrt(a(i, j));
      kraus.push_back(std::move(k));
    }
  }
  if (kraus.empty()) kraus.push_back(Matrix::Zero(a.rows(), a.cols()));
  return CPMap(std::move(kraus));
}

bool rc_feasible(const MatrixScalingInstance& inst) {
  const Index m = inst.a.rows();
  const Index n = inst.a.cols();
  if (inst.r.size() != m || inst.c.size() != n) throw DimensionError("marginals do not match A");
  if (m > 20) throw DimensionTooLarge("rc_feasible enumerates row subsets; m must be at most 20");
  const double total = inst.c.sum();
  const double tol = 1e-12 * std::max(1.0, total);
  if (std::abs(inst.r.sum() - total) > tol) return false;

  for (unsigned long mask = 1; mask < (1UL << m); ++mask) {
    double rows = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (mask & (1UL << i)) rows += inst.r[i];
    }
    double cols = 0.0;  // columns outside R
    for (Index j = 0; j < n; ++j) {
      bool zero = true;
      for (Index i = 0; i < m && zero; ++i) {
        if ((mask & (1UL << i)) && inst.a(i, j) != 0.0) zero = false;
      }
      if (!zero) cols += inst.c[j];
    }
    if (rows > cols + tol) return false;
  }
  return true;
}

MatrixScalingResult matrix_scale(const MatrixScalingInstance& inst, double epsilon,
                                 const AppOptions& opts) {
  const Index m = inst.a.rows();
  const Index n = inst.a.cols();
  if (inst.r.size() != m || inst.c.size() != n) throw DimensionError("marginals do not match A");
  require_equal_sums(inst.r.sum(), inst.c.sum(), "matrix scaling");

  const CPMap t = build_matrix_cpmap(inst.a);
  const MarginalSpec spec(inst.c, inst.r, {ones(m), ones(n)});
  MatrixScalingResult out;
  // Marginal errors of the from-identity form are scaled by the targets.
  double inner = epsilon / std::max({1.0, inst.r.maxCoeff(), inst.c.maxCoeff()});
  for (int attempt = 0; attempt < 3; ++attempt, inner /= 4.0) {
    out.solver = general_scale(t, spec, config_for(inner, opts));
    const ScalingPair s = from_identity_pair(out.solver, spec);
    out.x = s.g.diagonal().cwiseAbs2();
    out.y = s.h.diagonal().cwiseAbs2();
    const Eigen::MatrixXd scaled = out.x.asDiagonal() * inst.a * out.y.asDiagonal();
    out.row_error = (scaled.rowwise().sum() - inst.r).cwiseAbs().maxCoeff();
    out.col_error = (scaled.colwise().sum().transpose() - inst.c).cwiseAbs().maxCoeff();
    out.verified = out.row_error <= epsilon && out.col_error <= epsilon;
    if (!out.solver.success() || out.verified) break;
  }
  return out;
}

CPMap build_horn_cpmap(Index m, Index s) {
  if (m < 1 || s < 1) throw DimensionError("build_horn_cpmap: m and s must be positive");
  std::vector<Matrix> kraus;
  for (Index i = 0; i < s; ++i) {
    Matrix k = Matrix::Zero(m, m * s);
    k.block(0, i * m, m, m).setIdentity();
    kraus.push_back(std::move(k));
  }
  return CPMap(std::move(kraus));
}

HornResult horn_solve(const HornInstance& inst, double epsilon, const AppOptions& opts) {
  const Index m = inst.m;
  const auto s = static_cast<Index>(inst.spectra.size());
  if (m < 1 || s < 1) throw DimensionError("horn instance needs m >= 1 and at least one spectrum");
  RealVector p(m * s);
  for (Index i = 0; i < s; ++i) {
    const RealVector& pi = inst.spectra[static_cast<std::size_t>(i)];
    if (pi.size() != m) throw DimensionError("every spectrum must have length m");
    p.segment(i * m, m) = pi;
  }
  if (std::abs(p.sum() - static_cast<double>(m)) > 1e-12 * static_cast<double>(m)) {
    throw std::invalid_argument("horn instance: spectra must sum to m (trace of the identity), got " +
                                std::to_string(p.sum()));
  }

  const CPMap t = build_horn_cpmap(m, s);
  const MarginalSpec spec(p, RealVector::Ones(m), {{}, BlockSizes(static_cast<std::size_t>(s), m)});

  HornResult out;
  double inner = epsilon;
  for (int attempt = 0; attempt < 3; ++attempt, inner /= 4.0) {
    out.solver = general_scale(t, spec, config_for(inner, opts));
    const ScalingPair pair = from_identity_pair(out.solver, spec);
    const Matrix gd = pair.g.adjoint();
    out.h.clear();
    Matrix sum = Matrix::Zero(m, m);
    out.spectrum_error = 0.0;
    for (Index i = 0; i < s; ++i) {
      const Matrix b = gd * pair.h.block(i * m, i * m, m, m);
      out.h.push_back(symmetrize(b * b.adjoint()));
      sum += out.h.back();
      const RealVector err = eigenvalues_desc(out.h.back()) - inst.spectra[static_cast<std::size_t>(i)];
      out.spectrum_error = std::max(out.spectrum_error, err.cwiseAbs().maxCoeff());
    }
    out.sum_error = (sum - Matrix::Identity(m, m)).norm();
    out.verified = out.sum_error <= epsilon && out.spectrum_error <= epsilon;
    if (!out.solver.success() || out.verified) break;
  }
  return out;
}

HornNormalization horn_normalize(const RealVector& alpha, const RealVector& beta,
                                 const RealVector& gamma) {
  const Index m = alpha.size();
  if (m == 0 || beta.size() != m || gamma.size() != m) {
    throw DimensionError("horn_normalize: spectra must have the same positive length");
  }
  const RealVector a = sorted_desc(alpha);
  const RealVector b = sorted_desc(beta);
  const RealVector c = sorted_desc(gamma);

  HornNormalization out;
  out.trace_mismatch = std::abs(a.sum() + b.sum() - c.sum());
  const double range = std::max({a[0] - a[m - 1], b[0] - b[m - 1], c[0] - c[m - 1]});
  const double delta = range > 0.0 ? range : 1.0;
  out.t1 = delta - a[m - 1];
  out.t2 = delta - b[m - 1];
  out.t3 = delta + c[0];
  out.s = 1.0 / (out.t1 + out.t2 + out.t3);

  out.instance.m = m;
  out.instance.spectra.push_back(out.s * (a.array() + out.t1).matrix());
  out.instance.spectra.push_back(out.s * (b.array() + out.t2).matrix());
  out.instance.spectra.push_back(out.s * (out.t3 - c.reverse().array()).matrix());
  return out;
}

std::vector<Matrix> horn_denormalize(const HornNormalization& nrm, const std::vector<Matrix>& h) {
  if (h.size() != 3) throw DimensionError("horn_denormalize expects three matrices");
  const Index m = nrm.instance.m;
  const Matrix id = Matrix::Identity(m, m);
  return {h[0] / nrm.s - nrm.t1 * id, h[1] / nrm.s - nrm.t2 * id, nrm.t3 * id - h[2] / nrm.s};
}

CPMap build_forster_cpmap(const Matrix& u) {
  if (u.size() == 0) throw DimensionError("empty vector configuration");
  std::vector<Matrix> kraus;
  for (Index i = 0; i < u.cols(); ++i) {
    if (u.col(i).norm() == 0.0) {
      throw std::invalid_argument("vector u_" + std::to_string(i) + " is zero");
    }
    Matrix k = Matrix::Zero(u.rows(), u.cols());
    k.col(i) = u.col(i);
    kraus.push_back(std::move(k));
  }
  return CPMap(std::move(kraus));
}

ForsterResult forster_scale(const ForsterInstance& inst, double epsilon, const AppOptions& opts) {
  const Index m = inst.u.rows();
  const Index n = inst.u.cols();
  if (inst.p.size() != n || inst.q.size() != m) throw DimensionError("forster: p must have length n and q length m");
  for (Index i = 0; i < n; ++i) {
    if (!(inst.p[i] > 0.0)) throw std::invalid_argument("forster: weights p must be positive");
  }
  require_equal_sums(inst.p.sum(), inst.q.sum(), "forster");

  // Rotate a non-diagonal target to diagonal form.
  Matrix rot = Matrix::Identity(m, m);
  RealVector q = inst.q;
  if (inst.target) {
    if (inst.target->rows() != m || inst.target->cols() != m) throw DimensionError("forster: target must be m x m");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(*inst.target));
    q = eig.eigenvalues().reverse();
    rot = eig.eigenvectors().rowwise().reverse();
    for (Index i = 0; i < m; ++i) q[i] = std::max(q[i], 0.0);
  }
  const Matrix target = rot * q.cast<Complex>().asDiagonal() * rot.adjoint();
  const Matrix u = rot.adjoint() * inst.u;

  const CPMap t = build_forster_cpmap(u);
  const MarginalSpec spec(inst.p, q, {{}, ones(n)});

  ForsterResult out;
  double inner = epsilon / static_cast<double>(n + 1);
  for (int attempt = 0; attempt < 3; ++attempt, inner /= 4.0) {
    out.solver = general_scale(t, spec, config_for(inner, opts));
    const ScalingPair pair = from_identity_pair(out.solver, spec);
    const Matrix b = pair.g.adjoint();
    out.b = rot * b * rot.adjoint();
    out.w = out.b * inst.u;
    Matrix sum = Matrix::Zero(m, m);
    for (Index i = 0; i < n; ++i) {
      out.w.col(i).normalize();
      sum += inst.p[i] * out.w.col(i) * out.w.col(i).adjoint();
    }
    out.error = (sum - target).norm();
    out.verified = out.error <= epsilon;
    if (!out.solver.success() || out.verified) break;
  }
  return out;
}

bool polymatroid_membership(const ForsterInstance& inst) {
  const Index m = inst.u.rows();
  const Index n = inst.u.cols();
  if (inst.p.size() != n || inst.q.size() != m) throw DimensionError("polymatroid: p must have length n and q length m");
  if (n > 20) throw DimensionTooLarge("polymatroid_membership enumerates subsets; n must be at most 20");
  RealVector q = inst.q;
  if (inst.target) q = eigenvalues_desc(*inst.target);
  q = sorted_desc(q);
  const double total = q.sum();
  const double tol = 1e-9 * std::max(1.0, total);
  if (std::abs(inst.p.sum() - total) > tol) return false;

  RealVector prefix = RealVector::Zero(m + 1);
  for (Index i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + q[i];

  std::vector<Index> cols;
  for (unsigned long mask = 1; mask < (1UL << n); ++mask) {
    cols.clear();
    double weight = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (mask & (1UL << j)) {
        cols.push_back(j);
        weight += inst.p[j];
      }
    }
    const Matrix sub = inst.u(Eigen::all, cols);
    Eigen::JacobiSVD<Matrix> svd(sub);
    const auto& sv = svd.singularValues();
    Index rank = 0;
    for (Index k = 0; k < sv.size(); ++k) {
      if (sv[k] > 1e-9 * sv[0]) ++rank;
    }
    if (weight > prefix[rank] + tol) return false;
  }
  return true;
}

bool majorizes(const RealVector& q, const RealVector& p) {
  const Index len = std::max(q.size(), p.size());
  RealVector a = RealVector::Zero(len);
  RealVector b = RealVector::Zero(len);
  a.head(q.size()) = q;
  b.head(p.size()) = p;
  a = sorted_desc(a);
  b = sorted_desc(b);
  const double tol = 1e-9 * std::max(1.0, std::abs(a.sum()));
  if (std::abs(a.sum() - b.sum()) > tol) return false;
  double sa = 0.0;
  double sb = 0.0;
  for (Index i = 0; i < len; ++i) {
    sa += a[i];
    sb += b[i];
    if (sb > sa + tol) return false;
  }
  return true;
}

SchurHornResult schur_horn(const RealVector& p, const RealVector& q, double epsilon,
                           const AppOptions& opts) {
  const Index n = p.size();
  const Index m = q.size();
  if (m < 1 || m > n) throw DimensionError("schur_horn: need 1 <= length(q) <= length(p)");
  for (Index i = 0; i < n; ++i) {
    if (!(p[i] >= 0.0)) throw std::invalid_argument("schur_horn: diagonal entries must be nonnegative");
  }

  SchurHornResult out;
  out.majorized = majorizes(q, p);
  if (!out.majorized) return out;

  std::vector<Index> kept;
  for (Index i = 0; i < n; ++i) {
    if (p[i] > 0.0) kept.push_back(i);
  }
  const auto nk = static_cast<Index>(kept.size());
  RealVector pk(nk);
  for (Index j = 0; j < nk; ++j) pk[j] = p[kept[static_cast<std::size_t>(j)]];

  std::mt19937_64 rng(opts.seed);
  ForsterInstance inst{Matrix(), pk, sorted_desc(q), std::nullopt};
  for (int attempt = 0; attempt < 3; ++attempt) {
    inst.u = complex_gaussian(m, nk, rng);
    if (nk > 20 || polymatroid_membership(inst)) break;
  }
  out.forster = forster_scale(inst, epsilon, opts);

  Matrix v = Matrix::Zero(m, n);
  for (Index j = 0; j < nk; ++j) {
    v.col(kept[static_cast<std::size_t>(j)]) = std::sqrt(pk[j]) * out.forster.w.col(j);
  }
  out.h = v.adjoint() * v;
  out.diagonal_error = (out.h.diagonal().real() - p).cwiseAbs().maxCoeff();
  RealVector padded = RealVector::Zero(n);
  padded.head(m) = sorted_desc(q);
  out.spectrum_error = (eigenvalues_desc(out.h) - padded).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace opscale
