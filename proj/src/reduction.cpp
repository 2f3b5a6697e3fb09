#include "opscale/reduction.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace opscale {

namespace {

// Block offsets of G_lambda: block i has size lambda'_i.
std::vector<BlockRange> gadget_blocks(const Partition& lambda) {
  const Partition c = lambda.conjugate();
  std::vector<BlockRange> out;
  Index offset = 0;
  for (long s : c.parts()) {
    out.push_back({offset, s});
    offset += s;
  }
  return out;
}

long as_integer(double v, const char* name) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9 * std::max(1.0, std::abs(v)) || r <= 0.0) {
    throw NonIntegralSpectrum(std::string(name) + " must have positive integer entries");
  }
  return static_cast<long>(r);
}

Partition to_partition(const RealVector& v, const char* name) {
  std::vector<long> parts;
  for (Index i = 0; i < v.size(); ++i) parts.push_back(as_integer(v[i], name));
  return Partition(std::move(parts));
}

// Smallest denominator d <= cap with |v - round(v d)/d| tiny, or 0.
long denominator_of(double v, long cap) {
  for (long d = 1; d <= cap; ++d) {
    const double x = v * static_cast<double>(d);
    if (std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x))) return d;
  }
  return 0;
}

}  // namespace

Partition::Partition(std::vector<long> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw std::invalid_argument("partition needs at least one part");
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (parts_[i] <= 0) throw std::invalid_argument("partition parts must be positive");
    if (i > 0 && parts_[i] > parts_[i - 1]) {
      throw std::invalid_argument("partition parts must be nonincreasing");
    }
    total_ += parts_[i];
  }
}

Partition Partition::conjugate() const {
  std::vector<long> c(static_cast<std::size_t>(parts_.front()), 0);
  for (long part : parts_) {
    for (long i = 0; i < part; ++i) ++c[static_cast<std::size_t>(i)];
  }
  return Partition(std::move(c));
}

RealVector Partition::as_vector() const {
  RealVector v(size());
  for (Index i = 0; i < size(); ++i) v[i] = static_cast<double>(parts_[static_cast<std::size_t>(i)]);
  return v;
}

Partition conjugate_partition(const Partition& lambda) { return lambda.conjugate(); }

Matrix gadget_apply(const Partition& lambda, const Matrix& x) {
  if (x.rows() != lambda.size() || x.cols() != lambda.size()) {
    throw DimensionError("gadget_apply: expected a " + std::to_string(lambda.size()) +
                         "-dimensional square matrix");
  }
  Matrix out = Matrix::Zero(lambda.total(), lambda.total());
  for (const auto& b : gadget_blocks(lambda)) {
    out.block(b.offset, b.offset, b.size, b.size) = x.topLeftCorner(b.size, b.size);
  }
  return out;
}

Matrix gadget_dual_apply(const Partition& lambda, const Matrix& y) {
  if (y.rows() != lambda.total() || y.cols() != lambda.total()) {
    throw DimensionError("gadget_dual_apply: expected a " + std::to_string(lambda.total()) +
                         "-dimensional square matrix");
  }
  Matrix out = Matrix::Zero(lambda.size(), lambda.size());
  for (const auto& b : gadget_blocks(lambda)) {
    out.topLeftCorner(b.size, b.size) += y.block(b.offset, b.offset, b.size, b.size);
  }
  return out;
}

IntegralSpectra integral_spectra(const MarginalSpec& spec, long max_denominator) {
  long lcd = 1;
  const auto absorb = [&](const RealVector& v) {
    for (Index i = 0; i < v.size(); ++i) {
      const long d = denominator_of(v[i], max_denominator);
      if (d == 0) {
        throw NonIntegralSpectrum("spectrum entry " + std::to_string(v[i]) +
                                  " is not a fraction with denominator <= " +
                                  std::to_string(max_denominator));
      }
      lcd = std::lcm(lcd, d);
    }
  };
  absorb(spec.p());
  absorb(spec.q());
  const double s = static_cast<double>(lcd);
  IntegralSpectra out{to_partition(spec.p() * s, "p"), to_partition(spec.q() * s, "q"), lcd};
  if (out.p.total() != out.q.total()) {
    throw std::invalid_argument("integral spectra must have equal sums");
  }
  return out;
}

TruncatedMap::TruncatedMap(CPMap t, Partition p, Partition q)
    : t_(std::move(t)), p_(std::move(p)), q_(std::move(q)) {
  if (p_.size() != t_.cols() || q_.size() != t_.rows()) {
    throw DimensionError("truncation: partitions do not match the map's shape");
  }
  if (p_.total() != q_.total()) {
    throw std::invalid_argument("truncation: p and q must have the same sum");
  }
}

Matrix TruncatedMap::apply(const Matrix& x) const {
  return gadget_apply(q_, opscale::apply(t_, gadget_dual_apply(p_, x)));
}

Matrix TruncatedMap::dual_apply(const Matrix& y) const {
  return gadget_apply(p_, opscale::dual_apply(t_, gadget_dual_apply(q_, y)));
}

CPMap TruncatedMap::materialize() const {
  const auto rows = gadget_blocks(q_);
  const auto cols = gadget_blocks(p_);
  const Index dim = p_.total();
  std::vector<Matrix> kraus;
  kraus.reserve(t_.size() * rows.size() * cols.size());
  for (const Matrix& a : t_.kraus()) {
    for (const auto& rb : rows) {
      for (const auto& cb : cols) {
        Matrix k = Matrix::Zero(dim, dim);
        k.block(rb.offset, cb.offset, rb.size, cb.size) = a.topLeftCorner(rb.size, cb.size);
        kraus.push_back(std::move(k));
      }
    }
  }
  return CPMap(std::move(kraus));
}

CPMap build_truncation(const CPMap& t, const MarginalSpec& spec) {
  if (spec.n() != t.cols() || spec.m() != t.rows()) {
    throw DimensionError("marginal spectra do not match the map's shape");
  }
  return TruncatedMap(t, to_partition(spec.p(), "p"), to_partition(spec.q(), "q")).materialize();
}

}  // namespace opscale
