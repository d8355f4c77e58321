#pragma once

// Dual-Lorentzian least-squares fit of a measured ODMR spectrum and the
// inversion of the fitted dips into strain observables.
//
// Fit model (depths are peak-normalized, so depth is the fractional PL drop
// at the dip center):
//
//   pl(nu) = baseline - depth_+ g+^2 / ((nu - nu_+)^2 + g+^2)
//                     - depth_- g-^2 / ((nu - nu_-)^2 + g-^2)
//
// with g+ = g- = gamma unless independent widths are requested.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nvstrain/spectrum.hpp"

namespace nvstrain {

struct FitParams {
  double nu_plus = 0.0;      // GHz
  double nu_minus = 0.0;     // GHz
  double depth_plus = 0.0;
  double depth_minus = 0.0;
  double gamma = 0.0;        // GHz, HWHM; the + dip width when independent
  double baseline = 1.0;
  std::optional<double> gamma_minus;  // set only for independent widths

  double width_minus() const { return gamma_minus.value_or(gamma); }
};

// Fit parameters of the exact forward model: depth_+- = a alpha_+- / gamma.
FitParams params_from_model(const SpectrumModel& model);

struct FitOptions {
  bool independent_widths = false;
  int max_iterations = 500;
  double initial_damping = 1e-3;
  double damping_up = 2.0;    // on rejected step
  double damping_down = 3.0;  // on accepted step
  double rel_cost_tol = 1e-10;
  double grad_tol = 1e-12;
};

enum class Termination {
  Gradient,       // max |J^T r| below grad_tol
  CostChange,     // relative cost decrease below rel_cost_tol
  Stagnation,     // no decrease possible at machine precision
  MaxIterations,
};

const char* to_string(Termination t);

struct FitResult {
  FitParams params;
  FitParams uncertainties;   // 1 sigma from the linearized covariance
  Eigen::MatrixXd covariance;  // parameter order of DualLorentzian
  double residual_rms = 0.0;
  double cost = 0.0;           // sum of squared (weighted) residuals
  int iterations = 0;
  bool converged = false;
  Termination termination = Termination::MaxIterations;
  bool rank_deficient = false;
  // One dip vanished; both lines were merged at the surviving position.
  bool single_line = false;
  std::vector<double> accepted_costs;  // cost after each accepted step

  // Correlation coefficient between two parameters (indices as in
  // DualLorentzian::Index).
  double correlation(int i, int j) const;
};

// Model evaluation and analytic Jacobian for a packed parameter vector.
class DualLorentzian {
 public:
  enum Index {
    kNuPlus = 0,
    kNuMinus,
    kDepthPlus,
    kDepthMinus,
    kGammaPlus,
    kBaseline,
    kGammaMinus,  // only with independent widths
  };

  explicit DualLorentzian(bool independent_widths)
      : independent_(independent_widths) {}

  int size() const { return independent_ ? 7 : 6; }
  bool independent_widths() const { return independent_; }

  Eigen::VectorXd pack(const FitParams& p) const;
  FitParams unpack(const Eigen::VectorXd& x) const;

  double value(const Eigen::VectorXd& x, double nu) const;
  // d value / d x at nu.
  Eigen::VectorXd gradient(const Eigen::VectorXd& x, double nu) const;

 private:
  bool independent_;
};

// Seeds the fit from the data: baseline from the upper quartile, dips from
// the two deepest minima of a 5-point moving average.
// Throws FitError when there are fewer than 20 samples or no dip is found.
FitParams initial_guess(const SpectrumSamples& samples);

// Damped least squares (Levenberg-Marquardt with Marquardt scaling).
// Without a guess the fit starts from initial_guess and, when that guess
// found a single dip, additionally from a seed placed at the deepest dip of
// the single-dip residual; the lower-cost result wins. A dip that fits to
// zero depth is merged into the other one (FitResult::single_line).
FitResult fit_dual_lorentzian(const SpectrumSamples& samples,
                              const std::optional<FitParams>& guess = std::nullopt,
                              const FitOptions& options = {});

// Fits independent spectra concurrently; results follow input order.
std::vector<FitResult> fit_batch(std::span<const SpectrumSamples> spectra,
                                 const FitOptions& options = {},
                                 unsigned threads = 0);

struct StrainEstimate {
  double m_z_hat = 0.0;        // GHz
  double m_perp_hat = 0.0;     // GHz
  double imbalance_hat = 0.0;
  double phase_sum_hat = 0.0;  // rad in [0, pi]; true value is +- this
  bool ambiguous = true;       // sign of phase_sum_hat undetermined
  bool single_line = false;    // unresolved splitting; imbalance reported as 0
  // phi_str candidates (+phase_sum - 2 phi_mw, -phase_sum - 2 phi_mw),
  // wrapped to (-pi, pi]; present only when phi_mw was supplied.
  std::optional<std::array<double, 2>> phi_str_hat;
};

// Throws FitError when the fit did not converge or the total depth is zero.
StrainEstimate invert_to_strain(const FitResult& fit, double d,
                                std::optional<double> phi_mw = std::nullopt,
                                PhaseConvention convention = PhaseConvention::Sum);

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace nvstrain
