#pragma once

// Instance files, command dispatch and JSON run reports for the opscale tool.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "json.hpp"
#include "opscale/apps.hpp"
#include "opscale/cpmap.hpp"
#include "opscale/scaler.hpp"

namespace opscale::cli {

using Json = nlohmann::ordered_json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExitCode : int { kSuccess = 0, kFailure = 1, kInconclusive = 2, kUsage = 3 };

struct CpmapPayload {
  CPMap map;
  MarginalSpec spec;
  Mode mode = Mode::kGeneral;
};

struct MatscalePayload {
  MatrixScalingInstance instance;
};

/// Either the normalized spectra directly, or an A + B = C triple that is
/// normalized on load.
struct HornPayload {
  HornInstance instance;
  std::optional<HornNormalization> normalization;
  RealVector alpha;
  RealVector beta;
  RealVector gamma;
};

struct ForsterPayload {
  ForsterInstance instance;
};

struct SchurHornPayload {
  RealVector diagonal;
  RealVector spectrum;
};

using Payload =
    std::variant<CpmapPayload, MatscalePayload, HornPayload, ForsterPayload, SchurHornPayload>;

struct InstanceFile {
  Payload payload;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<long> max_iterations;

  std::string_view kind() const;
};

/// Throws IoError, ParseError (malformed JSON) or SchemaError.
InstanceFile parse_instance(const std::string& path);
InstanceFile parse_instance_text(const std::string& text);

/// Serializes an instance back to the input format.
std::string emit_instance(const InstanceFile& inst);

/// Exact field-by-field comparison.
bool same_instance(const InstanceFile& a, const InstanceFile& b);

struct RunFlags {
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<long> max_iterations;
  bool trace = false;
  long hard_cap = kHardCap;
};

struct RunOutcome {
  Json report;
  ExitCode exit_code = ExitCode::kFailure;
  std::string summary;
};

/// Commands: scale, check, matscale, horn, forster, schurhorn. Throws
/// SchemaError when the instance kind does not fit the command.
RunOutcome run(const std::string& command, const InstanceFile& inst, const RunFlags& flags);

/// JSON text in insertion order; doubles printed with 17 significant digits,
/// non-finite doubles as null.
std::string emit_report(const Json& report);

/// Entry point of the opscale executable.
int main_entry(int argc, char** argv);

}  // namespace opscale::cli
