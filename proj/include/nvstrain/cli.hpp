#pragma once

// Batch front end: simulate, fit, metrics, orientations and fidelity
// subcommands. Each run is driven by an optional flat JSON config per
// subcommand whose core values can be overridden by flags.
//
// Exit codes: 0 success, 2 config / parse / I/O error, 3 fit failure or
// non-convergence.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvstrain/fit.hpp"
#include "nvstrain/spectrum.hpp"
#include "nvstrain/strain_model.hpp"

namespace nvstrain::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNotConverged = 3,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ConfigError naming the first key of `obj` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed,
                         const std::string& context);

struct SimulateConfig {
  SpectrumModel model;
  std::vector<double> grid;
  std::optional<StrainTensor> tensor;  // as given, before any rotation
  std::optional<int> nv_orientation;
  std::string source = "none";  // amplitudes | tensor | scenario | none
  std::string output_csv = "spectrum.csv";
  std::string output_json;      // defaults to output_csv with .json
  std::vector<std::string> warnings;
};

// Parses and validates a simulate config document.
SimulateConfig parse_simulate_config(const nlohmann::json& cfg);

// Sidecar document describing a simulated spectrum.
nlohmann::json simulate_document(const SimulateConfig& cfg);

// Fit output document; `metrics` is null unless the fit converged.
nlohmann::json fit_document(const FitResult& fit, const std::string& input_name, double d,
                            std::optional<double> phi_mw, PhaseConvention convention);

// Shift / splitting / imbalance from a fit or simulate document.
StrainMetrics metrics_from_document(const nlohmann::json& doc, std::optional<double> d_override);

// Stable serialization: sorted keys, 2-space indent, trailing newline.
std::string dump(const nlohmann::json& doc);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nvstrain::cli
