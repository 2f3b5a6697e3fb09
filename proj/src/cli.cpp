#include "opscale/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "opscale/feasibility.hpp"
#include "opscale/relmetrics.hpp"

namespace opscale::cli {

namespace {


std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const Json& field(const Json& obj, const char* name) {
  if (!obj.contains(name)) throw SchemaError(std::string("missing field \"") + name + "\"");
  return obj.at(name);
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + ": must be finite");
  return v;
}

Complex complex_number(const Json& j, const std::string& path) {
  if (j.is_number()) return {number(j, path), 0.0};
  if (!j.is_array() || j.size() != 2) throw SchemaError(path + ": expected [re, im] or a number");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

RealVector real_vector(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path + ": expected a nonempty array of numbers");
  RealVector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number(j[i], at(path, i));
  return v;
}

template <typename Scalar, typename Read>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> read_matrix(const Json& j, const std::string& path,
                                                                  Read read) {
  if (!j.is_array() || j.empty()) throw SchemaError(path + ": expected a nonempty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw SchemaError(at(path, 0) + ": expected a nonempty row");
  const std::size_t cols = j[0].size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string rp = at(path, i);
    if (!j[i].is_array() || j[i].size() != cols) {
      throw SchemaError(rp + ": expected a row of length " + std::to_string(cols));
    }
    for (std::size_t k = 0; k < cols; ++k) {
      out(static_cast<Index>(i), static_cast<Index>(k)) = read(j[i][k], at(rp, k));
    }
  }
  return out;
}

Matrix complex_matrix(const Json& j, const std::string& path) {
  return read_matrix<Complex>(j, path, complex_number);
}

Eigen::MatrixXd real_matrix(const Json& j, const std::string& path) {
  return read_matrix<double>(j, path, number);
}

BlockSizes block_sizes(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path + ": expected an array of block sizes");
  BlockSizes out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long>() <= 0) {
      throw SchemaError(at(path, i) + ": block sizes must be positive integers");
    }
    out.push_back(j[i].get<Index>());
  }
  return out;
}

template <typename F>
auto schema_guard(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(what + ": " + e.what());
  }
}

CpmapPayload parse_cpmap(const Json& j) {
  const Json& kj = field(j, "kraus");
  if (!kj.is_array() || kj.empty()) throw SchemaError("kraus: expected a nonempty array of matrices");
  std::vector<Matrix> kraus;
  for (std::size_t i = 0; i < kj.size(); ++i) kraus.push_back(complex_matrix(kj[i], at("kraus", i)));
  BlockStructure blocks;
  if (j.contains("blocks")) {
    const Json& b = j.at("blocks");
    if (!b.is_object()) throw SchemaError("blocks: expected an object with \"rows\" and \"cols\"");
    if (b.contains("rows")) blocks.rows = block_sizes(b.at("rows"), "blocks.rows");
    if (b.contains("cols")) blocks.cols = block_sizes(b.at("cols"), "blocks.cols");
  }
  CPMap map = schema_guard("kraus", [&] { return CPMap(std::move(kraus)); });
  RealVector p = real_vector(field(j, "p"), "p");
  RealVector q = real_vector(field(j, "q"), "q");
  if (p.size() != map.cols()) throw SchemaError("p: length must equal the Kraus column count " + std::to_string(map.cols()));
  if (q.size() != map.rows()) throw SchemaError("q: length must equal the Kraus row count " + std::to_string(map.rows()));
  MarginalSpec spec = schema_guard("p/q", [&] { return MarginalSpec(p, q, blocks); });
  Mode mode = Mode::kGeneral;
  if (j.contains("mode")) {
    const Json& mj = j.at("mode");
    if (mj == "triangular") {
      mode = Mode::kTriangular;
    } else if (mj != "general") {
      throw SchemaError("mode: expected \"general\" or \"triangular\"");
    }
  }
  return {std::move(map), std::move(spec), mode};
}

MatscalePayload parse_matscale(const Json& j) {
  MatrixScalingInstance inst{real_matrix(field(j, "a"), "a"), real_vector(field(j, "r"), "r"),
                             real_vector(field(j, "c"), "c")};
  for (Index i = 0; i < inst.a.rows(); ++i) {
    for (Index k = 0; k < inst.a.cols(); ++k) {
      if (inst.a(i, k) < 0.0) {
        throw SchemaError("a[" + std::to_string(i) + "][" + std::to_string(k) +
                          "]: entries must be nonnegative, got " + std::to_string(inst.a(i, k)));
      }
    }
  }
  if (inst.r.size() != inst.a.rows()) throw SchemaError("r: length must equal the number of rows of a");
  if (inst.c.size() != inst.a.cols()) throw SchemaError("c: length must equal the number of columns of a");
  for (Index i = 0; i < inst.r.size(); ++i) {
    if (inst.r[i] < 0.0) throw SchemaError(at("r", static_cast<std::size_t>(i)) + ": must be nonnegative");
  }
  for (Index i = 0; i < inst.c.size(); ++i) {
    if (inst.c[i] < 0.0) throw SchemaError(at("c", static_cast<std::size_t>(i)) + ": must be nonnegative");
  }
  return {std::move(inst)};
}

void check_spectrum(const RealVector& v, const std::string& path) {
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) throw SchemaError(at(path, static_cast<std::size_t>(i)) + ": must be nonnegative");
    if (i > 0 && v[i] > v[i - 1]) throw SchemaError(path + ": must be nonincreasing");
  }
}

HornPayload parse_horn(const Json& j) {
  HornPayload out;
  if (j.contains("alpha")) {
    out.alpha = real_vector(j.at("alpha"), "alpha");
    out.beta = real_vector(field(j, "beta"), "beta");
    out.gamma = real_vector(field(j, "gamma"), "gamma");
    if (out.beta.size() != out.alpha.size() || out.gamma.size() != out.alpha.size()) {
      throw SchemaError("alpha, beta, gamma: must have the same length");
    }
    out.normalization = horn_normalize(out.alpha, out.beta, out.gamma);
    out.instance = out.normalization->instance;
    return out;
  }
  const Json& mj = field(j, "m");
  if (!mj.is_number_integer() || mj.get<long>() <= 0) throw SchemaError("m: expected a positive integer");
  out.instance.m = mj.get<Index>();
  const Json& sj = field(j, "spectra");
  if (!sj.is_array() || sj.empty()) throw SchemaError("spectra: expected a nonempty array");
  double total = 0.0;
  for (std::size_t i = 0; i < sj.size(); ++i) {
    RealVector v = real_vector(sj[i], at("spectra", i));
    if (v.size() != out.instance.m) throw SchemaError(at("spectra", i) + ": length must equal m");
    check_spectrum(v, at("spectra", i));
    total += v.sum();
    out.instance.spectra.push_back(std::move(v));
  }
  const double m = static_cast<double>(out.instance.m);
  if (std::abs(total - m) > 1e-12 * m) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "spectra: trace condition violated, the spectra sum to " << total
        << " but must sum to m = " << out.instance.m;
    throw SchemaError(msg.str());
  }
  return out;
}

ForsterPayload parse_forster(const Json& j) {
  const Json& vj = field(j, "vectors");
  if (!vj.is_array() || vj.empty()) throw SchemaError("vectors: expected a nonempty array of vectors");
  std::size_t m = 0;
  std::vector<std::vector<Complex>> cols;
  for (std::size_t i = 0; i < vj.size(); ++i) {
    const std::string path = at("vectors", i);
    if (!vj[i].is_array() || vj[i].empty()) throw SchemaError(path + ": expected a nonempty vector");
    if (i == 0) m = vj[i].size();
    if (vj[i].size() != m) throw SchemaError(path + ": all vectors must have the same length");
    std::vector<Complex> col;
    double norm = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      col.push_back(complex_number(vj[i][k], at(path, k)));
      norm += std::norm(col.back());
    }
    if (norm == 0.0) throw SchemaError(path + ": zero vector");
    cols.push_back(std::move(col));
  }
  ForsterInstance inst;
  inst.u.resize(static_cast<Index>(m), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) inst.u(static_cast<Index>(k), static_cast<Index>(i)) = cols[i][k];
  }
  inst.p = real_vector(field(j, "p"), "p");
  inst.q = real_vector(field(j, "q"), "q");
  if (inst.p.size() != inst.u.cols()) throw SchemaError("p: one weight per vector required");
  if (inst.q.size() != inst.u.rows()) throw SchemaError("q: length must equal the vector dimension");
  for (Index i = 0; i < inst.p.size(); ++i) {
    if (!(inst.p[i] > 0.0)) throw SchemaError(at("p", static_cast<std::size_t>(i)) + ": must be positive");
  }
  check_spectrum(inst.q, "q");
  if (j.contains("target")) {
    inst.target = complex_matrix(j.at("target"), "target");
    if (inst.target->rows() != inst.u.rows() || inst.target->cols() != inst.u.rows()) {
      throw SchemaError("target: must be m x m");
    }
  }
  return {std::move(inst)};
}

SchurHornPayload parse_schurhorn(const Json& j) {
  SchurHornPayload out{real_vector(field(j, "diagonal"), "diagonal"),
                       real_vector(field(j, "spectrum"), "spectrum")};
  check_spectrum(out.diagonal, "diagonal");
  check_spectrum(out.spectrum, "spectrum");
  if (out.spectrum.size() > out.diagonal.size()) {
    throw SchemaError("spectrum: must not be longer than diagonal");
  }
  return out;
}

InstanceFile parse_json(const Json& j) {
  if (!j.is_object()) throw SchemaError("instance must be a JSON object");
  const Json& kj = field(j, "kind");
  if (!kj.is_string()) throw SchemaError("kind: expected a string");
  const std::string kind = kj.get<std::string>();

  std::optional<Payload> payload;
  if (kind == "cpmap") {
    payload = parse_cpmap(j);
  } else if (kind == "matscale") {
    payload = parse_matscale(j);
  } else if (kind == "horn") {
    payload = parse_horn(j);
  } else if (kind == "forster") {
    payload = parse_forster(j);
  } else if (kind == "schurhorn") {
    payload = parse_schurhorn(j);
  } else {
    throw SchemaError("kind: unknown kind \"" + kind + "\"");
  }
  InstanceFile out{std::move(*payload), std::nullopt, std::nullopt, std::nullopt};
  if (j.contains("epsilon")) {
    out.epsilon = number(j.at("epsilon"), "epsilon");
    if (!(*out.epsilon > 0.0)) throw SchemaError("epsilon: must be positive");
  }
  if (j.contains("seed")) {
    const Json& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw SchemaError("seed: expected a nonnegative integer");
    }
    out.seed = s.get<std::uint64_t>();
  }
  if (j.contains("options")) {
    const Json& o = j.at("options");
    if (!o.is_object()) throw SchemaError("options: expected an object");
    if (o.contains("max_iterations")) {
      const Json& mi = o.at("max_iterations");
      if (!mi.is_number_integer() || mi.get<long>() < 0) {
        throw SchemaError("options.max_iterations: expected a nonnegative integer");
      }
      out.max_iterations = mi.get<long>();
    }
  }
  return out;
}


Json to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

Json to_json(const Matrix& x) {
  Json rows = Json::array();
  for (Index i = 0; i < x.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < x.cols(); ++k) row.push_back(to_json(x(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const RealVector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json real_matrix_json(const Eigen::MatrixXd& a) {
  Json rows = Json::array();
  for (Index i = 0; i < a.rows(); ++i) rows.push_back(to_json(RealVector(a.row(i).transpose())));
  return rows;
}

Json blocks_json(const BlockSizes& b) {
  Json out = Json::array();
  for (Index s : b) out.push_back(s);
  return out;
}

void emit_value(const Json& j, std::string& out) {
  switch (j.type()) {
    case Json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += Json(k).dump();
        out += ':';
        emit_value(v, out);
      }
      out += '}';
      break;
    }
    case Json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        emit_value(v, out);
      }
      out += ']';
      break;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
      }
      break;
    }
    default:
      out += j.dump();
  }
}


struct Settings {
  double epsilon;
  std::uint64_t seed;
  std::optional<long> max_iterations;
};

Settings settings(const InstanceFile& inst, const RunFlags& flags) {
  Settings s{1e-3, 0, std::nullopt};
  if (inst.epsilon) s.epsilon = *inst.epsilon;
  if (flags.epsilon) s.epsilon = *flags.epsilon;
  if (inst.seed) s.seed = *inst.seed;
  if (flags.seed) s.seed = *flags.seed;
  s.max_iterations = flags.max_iterations ? flags.max_iterations : inst.max_iterations;
  if (!(s.epsilon > 0.0)) throw SchemaError("epsilon must be positive");
  return s;
}

AppOptions app_options(const Settings& s, const RunFlags& flags) {
  return {s.seed, s.max_iterations, flags.hard_cap};
}

Json solver_json(const ScalingResult& r, bool trace) {
  Json j;
  j["status"] = std::string(to_string(r.status));
  j["iterations"] = r.iterations;
  j["budget"] = r.budget;
  j["initial_ds"] = r.initial_ds;
  j["final_ds"] = r.final_ds;
  j["ds_threshold"] = r.ds_threshold;
  if (r.min_eigenvalue) j["min_eigenvalue"] = *r.min_eigenvalue;
  const CapacityTrace& ct = r.capacity_trace;
  Json cap;
  cap["steps"] = ct.log_factors.size();
  cap["cumulative_log"] = ct.cumulative;
  cap["lower_bound_log"] = ct.lower_bound;
  cap["max_log_upper"] =
      ct.log_upper.empty() ? 0.0 : *std::max_element(ct.log_upper.begin(), ct.log_upper.end());
  j["capacity_trace"] = cap;
  if (trace) {
    Json ds = Json::array();
    for (double d : r.ds_trace) ds.push_back(d);
    j["ds_trace"] = ds;
    Json lf = Json::array();
    for (double d : ct.log_factors) lf.push_back(d);
    j["log_factors"] = lf;
  }
  return j;
}

ExitCode exit_for(bool ok) { return ok ? ExitCode::kSuccess : ExitCode::kFailure; }

std::string summary_line(const std::string& command, const std::string& status, long iterations) {
  return command + ": " + status + " after " + std::to_string(iterations) + " iterations";
}

template <typename T>
const T& expect(const InstanceFile& inst, const std::string& command, const char* kind) {
  const T* p = std::get_if<T>(&inst.payload);
  if (!p) {
    throw SchemaError("command \"" + command + "\" needs an instance of kind \"" + kind +
                      "\", got \"" + std::string(inst.kind()) + "\"");
  }
  return *p;
}

RunOutcome run_scale(const InstanceFile& inst, const RunFlags& flags) {
  const auto& pl = expect<CpmapPayload>(inst, "scale", "cpmap");
  const Settings s = settings(inst, flags);
  SolverConfig cfg;
  cfg.epsilon = s.epsilon;
  cfg.seed = s.seed;
  cfg.max_iterations = s.max_iterations;
  cfg.mode = pl.mode;
  cfg.hard_cap = flags.hard_cap;
  const ScalingResult r = solve(pl.map, pl.spec, cfg);

  RunOutcome out;
  Json& j = out.report;
  j["command"] = "scale";
  j["mode"] = std::string(to_string(pl.mode));
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  j.update(solver_json(r, flags.trace));
  j["form"] = r.form == PairForm::kToIdentity ? "P->I,Q->I" : "I->Q,I->P";
  const CPMap scaled = scale(pl.map, r.pair);
  Json errors;
  if (r.form == PairForm::kToIdentity) {
    const auto [tp, tq] = marginals(scaled, pl.spec);
    errors["t_of_p_minus_i"] = (tp - Matrix::Identity(tp.rows(), tp.cols())).norm();
    errors["tdual_of_q_minus_i"] = (tq - Matrix::Identity(tq.rows(), tq.cols())).norm();
  } else {
    errors["t_of_i_minus_q"] =
        (opscale::apply(scaled, Matrix::Identity(scaled.cols(), scaled.cols())) - pl.spec.Q()).norm();
    errors["tdual_of_i_minus_p"] =
        (dual_apply(scaled, Matrix::Identity(scaled.rows(), scaled.rows())) - pl.spec.P()).norm();
  }
  j["marginal_errors"] = errors;
  j["g"] = to_json(r.pair.g);
  j["h"] = to_json(r.pair.h);
  out.exit_code = exit_for(r.success());
  out.summary = summary_line("scale", std::string(to_string(r.status)), r.iterations);
  return out;
}

RunOutcome run_check(const InstanceFile& inst, const RunFlags& flags) {
  const Settings s = settings(inst, flags);
  std::optional<CPMap> map;
  std::optional<MarginalSpec> spec;
  if (const auto* c = std::get_if<CpmapPayload>(&inst.payload)) {
    map = c->map;
    spec = c->spec;
  } else if (const auto* ms = std::get_if<MatscalePayload>(&inst.payload)) {
    const auto& a = ms->instance;
    map = build_matrix_cpmap(a.a);
    spec = MarginalSpec(a.c, a.r,
                        {BlockSizes(static_cast<std::size_t>(a.a.rows()), 1),
                         BlockSizes(static_cast<std::size_t>(a.a.cols()), 1)});
  } else {
    throw SchemaError("command \"check\" needs an instance of kind \"cpmap\" or \"matscale\", got \"" +
                      std::string(inst.kind()) + "\"");
  }
  if (spec->trace_gap() > 1e-12 * std::max(1.0, spec->p().sum())) {
    throw SchemaError("p, q: sums differ, so no scaling exists");
  }
  DecisionOptions opts{s.max_iterations, flags.hard_cap};
  const FeasibilityVerdict v = decide_scalable(*map, *spec, s.seed, opts);

  RunOutcome out;
  Json& j = out.report;
  j["command"] = "check";
  j["decision"] = std::string(to_string(v.decision));
  j["certificate_epsilon"] = certificate_epsilon(*spec);
  j["epsilon_used"] = v.epsilon_used;
  j["threshold_used"] = v.threshold_used;
  j["seed"] = s.seed;
  if (v.witness) j["witness"] = solver_json(*v.witness, flags.trace);
  switch (v.decision) {
    case Decision::kFeasible: out.exit_code = ExitCode::kSuccess; break;
    case Decision::kInfeasible: out.exit_code = ExitCode::kFailure; break;
    case Decision::kInconclusive: out.exit_code = ExitCode::kInconclusive; break;
  }
  out.summary = "check: " + std::string(to_string(v.decision));
  return out;
}

RunOutcome run_matscale(const InstanceFile& inst, const RunFlags& flags) {
  const auto& pl = expect<MatscalePayload>(inst, "matscale", "matscale");
  const Settings s = settings(inst, flags);
  const MatrixScalingInstance& a = pl.instance;
  if (std::abs(a.r.sum() - a.c.sum()) > 1e-12 * std::max(1.0, a.c.sum())) {
    throw SchemaError("r, c: row and column targets must have the same total");
  }
  const MatrixScalingResult r = matrix_scale(a, s.epsilon, app_options(s, flags));

  RunOutcome out;
  Json& j = out.report;
  j["command"] = "matscale";
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  j["rc_feasible"] = a.a.rows() <= 20 ? Json(rc_feasible(a)) : Json(nullptr);
  j.update(solver_json(r.solver, flags.trace));
  j["verified"] = r.verified;
  j["marginal_errors"] = Json{{"rows", r.row_error}, {"cols", r.col_error}};
  j["x"] = to_json(r.x);
  j["y"] = to_json(r.y);
  j["scaled"] = real_matrix_json(r.x.asDiagonal() * a.a * r.y.asDiagonal());
  out.exit_code = exit_for(r.success());
  out.summary = summary_line("matscale", std::string(to_string(r.solver.status)), r.solver.iterations);
  return out;
}

RunOutcome run_horn(const InstanceFile& inst, const RunFlags& flags) {
  const auto& pl = expect<HornPayload>(inst, "horn", "horn");
  const Settings s = settings(inst, flags);
  RunOutcome out;
  Json& j = out.report;
  j["command"] = "horn";
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  if (pl.normalization && !pl.normalization->trace_consistent()) {
    j["status"] = "ERROR_TRACE_MISMATCH";
    j["trace_mismatch"] = pl.normalization->trace_mismatch;
    out.exit_code = ExitCode::kFailure;
    out.summary = "horn: ERROR_TRACE_MISMATCH (sum alpha + sum beta != sum gamma)";
    return out;
  }
  const HornResult r = horn_solve(pl.instance, s.epsilon, app_options(s, flags));
  j.update(solver_json(r.solver, flags.trace));
  j["verified"] = r.verified;
  j["marginal_errors"] = Json{{"sum", r.sum_error}, {"spectra", r.spectrum_error}};
  Json hs = Json::array();
  for (const Matrix& h : r.h) hs.push_back(to_json(h));
  j["H"] = hs;
  if (pl.normalization) {
    const auto& n = *pl.normalization;
    j["normalization"] = Json{{"s", n.s}, {"t1", n.t1}, {"t2", n.t2}, {"t3", n.t3}};
    const std::vector<Matrix> abc = horn_denormalize(n, r.h);
    j["A"] = to_json(abc[0]);
    j["B"] = to_json(abc[1]);
    j["C"] = to_json(abc[2]);
  }
  out.exit_code = exit_for(r.success());
  out.summary = summary_line("horn", std::string(to_string(r.solver.status)), r.solver.iterations);
  return out;
}

RunOutcome run_forster(const InstanceFile& inst, const RunFlags& flags) {
  const auto& pl = expect<ForsterPayload>(inst, "forster", "forster");
  const Settings s = settings(inst, flags);
  const ForsterInstance& fi = pl.instance;
  if (std::abs(fi.p.sum() - fi.q.sum()) > 1e-12 * std::max(1.0, fi.q.sum())) {
    throw SchemaError("p, q: weights and spectrum must have the same total");
  }
  const ForsterResult r = forster_scale(fi, s.epsilon, app_options(s, flags));

  RunOutcome out;
  Json& j = out.report;
  j["command"] = "forster";
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  j["polymatroid_member"] = fi.u.cols() <= 20 ? Json(polymatroid_membership(fi)) : Json(nullptr);
  j.update(solver_json(r.solver, flags.trace));
  j["verified"] = r.verified;
  j["marginal_errors"] = Json{{"isotropy", r.error}};
  j["B"] = to_json(r.b);
  j["W"] = to_json(r.w);
  out.exit_code = exit_for(r.success());
  out.summary = summary_line("forster", std::string(to_string(r.solver.status)), r.solver.iterations);
  return out;
}

RunOutcome run_schurhorn(const InstanceFile& inst, const RunFlags& flags) {
  const auto& pl = expect<SchurHornPayload>(inst, "schurhorn", "schurhorn");
  const Settings s = settings(inst, flags);
  RunOutcome out;
  Json& j = out.report;
  j["command"] = "schurhorn";
  j["epsilon"] = s.epsilon;
  j["seed"] = s.seed;
  const SchurHornResult r = schur_horn(pl.diagonal, pl.spectrum, s.epsilon, app_options(s, flags));
  j["majorized"] = r.majorized;
  if (!r.majorized) {
    j["status"] = "ERROR_NOT_MAJORIZED";
    out.exit_code = ExitCode::kFailure;
    out.summary = "schurhorn: ERROR_NOT_MAJORIZED";
    return out;
  }
  j.update(solver_json(r.forster.solver, flags.trace));
  j["verified"] = r.forster.verified;
  j["marginal_errors"] = Json{{"diagonal", r.diagonal_error}, {"spectrum", r.spectrum_error}};
  j["H"] = to_json(r.h);
  out.exit_code = exit_for(r.success());
  out.summary =
      summary_line("schurhorn", std::string(to_string(r.forster.solver.status)), r.forster.solver.iterations);
  return out;
}

}  // namespace

std::string_view InstanceFile::kind() const {
  switch (payload.index()) {
    case 0: return "cpmap";
    case 1: return "matscale";
    case 2: return "horn";
    case 3: return "forster";
    default: return "schurhorn";
  }
}

InstanceFile parse_instance_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // Translate the byte offset into a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ParseError("line " + std::to_string(line) + ": " + e.what());
  }
  return parse_json(j);
}

InstanceFile parse_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_instance_text(buf.str());
}

std::string emit_instance(const InstanceFile& inst) {
  Json j;
  j["kind"] = std::string(inst.kind());
  std::visit(
      [&](const auto& pl) {
        using T = std::decay_t<decltype(pl)>;
        if constexpr (std::is_same_v<T, CpmapPayload>) {
          Json kraus = Json::array();
          for (const Matrix& a : pl.map.kraus()) kraus.push_back(to_json(a));
          j["kraus"] = kraus;
          j["p"] = to_json(pl.spec.p());
          j["q"] = to_json(pl.spec.q());
          const auto& b = pl.spec.blocks();
          if (!b.rows.empty() || !b.cols.empty()) {
            j["blocks"] = Json{{"rows", blocks_json(b.rows)}, {"cols", blocks_json(b.cols)}};
          }
          if (pl.mode == Mode::kTriangular) j["mode"] = "triangular";
        } else if constexpr (std::is_same_v<T, MatscalePayload>) {
          j["a"] = real_matrix_json(pl.instance.a);
          j["r"] = to_json(pl.instance.r);
          j["c"] = to_json(pl.instance.c);
        } else if constexpr (std::is_same_v<T, HornPayload>) {
          if (pl.normalization) {
            j["alpha"] = to_json(pl.alpha);
            j["beta"] = to_json(pl.beta);
            j["gamma"] = to_json(pl.gamma);
          } else {
            j["m"] = pl.instance.m;
            Json sp = Json::array();
            for (const RealVector& v : pl.instance.spectra) sp.push_back(to_json(v));
            j["spectra"] = sp;
          }
        } else if constexpr (std::is_same_v<T, ForsterPayload>) {
          const ForsterInstance& fi = pl.instance;
          Json vs = Json::array();
          for (Index i = 0; i < fi.u.cols(); ++i) {
            Json v = Json::array();
            for (Index k = 0; k < fi.u.rows(); ++k) v.push_back(to_json(fi.u(k, i)));
            vs.push_back(v);
          }
          j["vectors"] = vs;
          j["p"] = to_json(fi.p);
          j["q"] = to_json(fi.q);
          if (fi.target) j["target"] = to_json(*fi.target);
        } else {
          j["diagonal"] = to_json(pl.diagonal);
          j["spectrum"] = to_json(pl.spectrum);
        }
      },
      inst.payload);
  if (inst.epsilon) j["epsilon"] = *inst.epsilon;
  if (inst.seed) j["seed"] = *inst.seed;
  if (inst.max_iterations) j["options"] = Json{{"max_iterations", *inst.max_iterations}};
  return emit_report(j);
}

bool same_instance(const InstanceFile& a, const InstanceFile& b) {
  if (a.payload.index() != b.payload.index() || a.epsilon != b.epsilon || a.seed != b.seed ||
      a.max_iterations != b.max_iterations) {
    return false;
  }
  const auto same_spec = [](const MarginalSpec& x, const MarginalSpec& y) {
    return x.p() == y.p() && x.q() == y.q() && x.blocks().rows == y.blocks().rows &&
           x.blocks().cols == y.blocks().cols;
  };
  return std::visit(
      [&](const auto& pa) {
        using T = std::decay_t<decltype(pa)>;
        const T& pb = std::get<T>(b.payload);
        if constexpr (std::is_same_v<T, CpmapPayload>) {
          if (pa.map.size() != pb.map.size() || pa.mode != pb.mode) return false;
          for (std::size_t i = 0; i < pa.map.size(); ++i) {
            if (pa.map[i].rows() != pb.map[i].rows() || pa.map[i].cols() != pb.map[i].cols() ||
                pa.map[i] != pb.map[i]) {
              return false;
            }
          }
          return same_spec(pa.spec, pb.spec);
        } else if constexpr (std::is_same_v<T, MatscalePayload>) {
          const auto& x = pa.instance;
          const auto& y = pb.instance;
          return x.a.rows() == y.a.rows() && x.a.cols() == y.a.cols() && x.a == y.a &&
                 x.r == y.r && x.c == y.c;
        } else if constexpr (std::is_same_v<T, HornPayload>) {
          if (pa.instance.m != pb.instance.m || pa.instance.spectra != pb.instance.spectra ||
              pa.normalization.has_value() != pb.normalization.has_value()) {
            return false;
          }
          return !pa.normalization ||
                 (pa.alpha == pb.alpha && pa.beta == pb.beta && pa.gamma == pb.gamma);
        } else if constexpr (std::is_same_v<T, ForsterPayload>) {
          const auto& x = pa.instance;
          const auto& y = pb.instance;
          if (x.u.rows() != y.u.rows() || x.u.cols() != y.u.cols() || x.u != y.u || x.p != y.p ||
              x.q != y.q || x.target.has_value() != y.target.has_value()) {
            return false;
          }
          return !x.target || *x.target == *y.target;
        } else {
          return pa.diagonal == pb.diagonal && pa.spectrum == pb.spectrum;
        }
      },
      a.payload);
}

RunOutcome run(const std::string& command, const InstanceFile& inst, const RunFlags& flags) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  if (command == "scale") {
    out = run_scale(inst, flags);
  } else if (command == "check") {
    out = run_check(inst, flags);
  } else if (command == "matscale") {
    out = run_matscale(inst, flags);
  } else if (command == "horn") {
    out = run_horn(inst, flags);
  } else if (command == "forster") {
    out = run_forster(inst, flags);
  } else if (command == "schurhorn") {
    out = run_schurhorn(inst, flags);
  } else {
    throw SchemaError("unknown command \"" + command + "\"");
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  out.report["wall_time_ms"] = std::chrono::duration<double, std::milli>(elapsed).count();
  return out;
}

std::string emit_report(const Json& report) {
  std::string out;
  emit_value(report, out);
  return out;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Operator scaling of completely positive maps to prescribed marginals"};
  app.require_subcommand(1);

  std::string path;
  RunFlags flags;
  std::string output;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  long max_iters = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"scale", "Scale a cpmap instance to (P -> I, Q -> I)"},
      {"check", "Decide approximate scalability of a cpmap or matscale instance"},
      {"matscale", "Scale a nonnegative matrix to prescribed row and column sums"},
      {"horn", "Find Hermitian matrices with given spectra summing to the identity"},
      {"forster", "Put vectors in radial isotropic position"},
      {"schurhorn", "Build a Hermitian matrix with given diagonal and spectrum"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("instance", path, "Instance file (JSON)")->required();
    sub->add_option("--epsilon", epsilon, "Target accuracy")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--max-iters", max_iters, "Iteration budget (default: theoretical bound, capped)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--trace", flags.trace, "Include per-iteration ds values");
    sub->add_option("--output", output, "Write the report here instead of stdout");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }

  std::string command;
  for (CLI::App* sub : subs) {
    if (sub->parsed()) {
      command = sub->get_name();
      if (sub->count("--epsilon")) flags.epsilon = epsilon;
      if (sub->count("--seed")) flags.seed = seed;
      if (sub->count("--max-iters")) flags.max_iterations = max_iters;
    }
  }
  if (const char* cap = std::getenv("OPSCALE_HARD_CAP")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end == cap || *end != '\0' || v <= 0) {
      std::cerr << "opscale: OPSCALE_HARD_CAP must be a positive integer\n";
      return static_cast<int>(ExitCode::kUsage);
    }
    flags.hard_cap = v;
  }

  RunOutcome outcome;
  try {
    const InstanceFile inst = parse_instance(path);
    outcome = run(command, inst, flags);
  } catch (const IoError& e) {
    std::cerr << "opscale: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  } catch (const ParseError& e) {
    std::cerr << "opscale: parse error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  } catch (const SchemaError& e) {
    std::cerr << "opscale: invalid instance: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  } catch (const std::exception& e) {
    std::cerr << "opscale: error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }

  const std::string text = emit_report(outcome.report) + "\n";
  if (output.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out || !(out << text)) {
      std::cerr << "opscale: cannot write " << output << "\n";
      return static_cast<int>(ExitCode::kUsage);
    }
  }
  std::cerr << outcome.summary << "\n";
  return static_cast<int>(outcome.exit_code);
}

}  // namespace opscale::cli
