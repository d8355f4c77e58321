#include "nvstrain/fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <fmt/format.h>

#include "nvstrain/error.hpp"

namespace nvstrain {

namespace {

constexpr int kSmoothWindow = 5;
constexpr double kNoiseSigmas = 3.0;
constexpr double kMaxDamping = 1e16;
constexpr double kVanishedDepth = 1e-8;  // relative to the deeper dip

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

std::vector<double> moving_average(const std::vector<double>& y, int window) {
  const int n = static_cast<int>(y.size());
  const int half = window / 2;
  std::vector<double> out(y.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (int k = lo; k <= hi; ++k) acc += y[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(i)] = acc / (hi - lo + 1);
  }
  return out;
}

// Robust white-noise estimate from second differences.
double noise_sigma(const std::vector<double>& y) {
  if (y.size() < 3) return 0.0;
  std::vector<double> d2;
  d2.reserve(y.size() - 2);
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    d2.push_back(std::abs(y[i + 1] - 2.0 * y[i] + y[i - 1]));
  }
  return 1.4826 * median(std::move(d2)) / std::sqrt(6.0);
}

double mean_step(const SpectrumSamples& s) {
  return (s.nu.back() - s.nu.front()) / static_cast<double>(s.size() - 1);
}

// Half-width of the dip at idx where the smoothed curve crosses `level`.
std::optional<double> half_width(const std::vector<double>& nu,
                                 const std::vector<double>& y, std::size_t idx,
                                 double level) {
  std::optional<double> left;
  std::optional<double> right;
  for (std::size_t i = idx; i > 0; --i) {
    if (y[i - 1] >= level) {
      const double t = (level - y[i]) / (y[i - 1] - y[i]);
      left = nu[i] + t * (nu[i - 1] - nu[i]);
      break;
    }
  }
  for (std::size_t i = idx; i + 1 < y.size(); ++i) {
    if (y[i + 1] >= level) {
      const double t = (level - y[i]) / (y[i + 1] - y[i]);
      right = nu[i] + t * (nu[i + 1] - nu[i]);
      break;
    }
  }
  if (left && right) return 0.5 * (*right - *left);
  if (left) return nu[idx] - *left;
  if (right) return *right - nu[idx];
  return std::nullopt;
}

struct Seed {
  FitParams params;
  bool single_dip = false;
  std::size_t deep_index = 0;
  double deep_depth = 0.0;
  double noise = 0.0;
};

Seed make_seed(const SpectrumSamples& samples) {
  samples.validate();
  const std::size_t n = samples.size();
  if (n < 20) {
    throw FitError(fmt::format("too few samples for a fit: {} (need >= 20)", n));
  }
  const auto& nu = samples.nu;
  const auto& pl = samples.pl;

  std::vector<double> sorted = pl;
  std::sort(sorted.begin(), sorted.end());
  const std::vector<double> upper(sorted.begin() + static_cast<std::ptrdiff_t>((3 * n) / 4),
                                  sorted.end());
  const double baseline = median(upper);

  const auto smooth = moving_average(pl, kSmoothWindow);
  const double noise = noise_sigma(pl);
  const double smooth_noise = noise / std::sqrt(static_cast<double>(kSmoothWindow));
  const double floor = kNoiseSigmas * noise + 1e-12 * std::max(1.0, std::abs(baseline));

  const auto deepest =
      static_cast<std::size_t>(std::min_element(smooth.begin(), smooth.end()) - smooth.begin());
  const double deep_depth = baseline - smooth[deepest];
  if (!(deep_depth > floor)) {
    throw FitError("flat spectrum: no dip below the baseline noise level");
  }

  // Second dip: deepest other local minimum that is significant and separated
  // from the first by a ridge higher than the smoothed noise.
  const double prominence = kNoiseSigmas * smooth_noise + 1e-12 * std::max(1.0, std::abs(baseline));
  std::optional<std::size_t> second;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(smooth[i] <= smooth[i - 1] && smooth[i] < smooth[i + 1])) continue;
    const std::size_t gap = i > deepest ? i - deepest : deepest - i;
    if (gap < 2) continue;
    if (!(baseline - smooth[i] > floor)) continue;
    const auto [lo, hi] = std::minmax(i, deepest);
    const double ridge = *std::max_element(smooth.begin() + static_cast<std::ptrdiff_t>(lo),
                                           smooth.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    if (!(ridge - smooth[i] > prominence)) continue;
    // Strict comparison keeps the lower-frequency minimum on equal depth.
    if (!second || smooth[i] < smooth[*second]) second = i;
  }

  const double step = mean_step(samples);
  double gamma = half_width(nu, smooth, deepest, baseline - 0.5 * deep_depth).value_or(2.0 * step);
  gamma = std::max(gamma, step);

  if (nu.back() - nu.front() < 4.0 * gamma) {
    throw FitError(fmt::format(
        "spectrum spans {} GHz, fewer than 4 linewidths (gamma ~ {} GHz)",
        nu.back() - nu.front(), gamma));
  }

  Seed seed;
  seed.deep_index = deepest;
  seed.deep_depth = deep_depth;
  seed.noise = noise;
  FitParams& p = seed.params;
  p.baseline = baseline;
  p.gamma = gamma;
  if (second) {
    const auto [lo, hi] = std::minmax(*second, deepest);
    p.nu_minus = nu[lo];
    p.nu_plus = nu[hi];
    p.depth_minus = baseline - smooth[lo];
    p.depth_plus = baseline - smooth[hi];
  } else {
    seed.single_dip = true;
    const std::size_t lo = deepest > 0 ? deepest - 1 : deepest;
    const std::size_t hi = deepest + 1 < n ? deepest + 1 : deepest;
    p.nu_minus = lo == deepest ? nu[deepest] - step : nu[lo];
    p.nu_plus = hi == deepest ? nu[deepest] + step : nu[hi];
    p.depth_minus = 0.5 * deep_depth;
    p.depth_plus = 0.5 * deep_depth;
  }
  return seed;
}

// Alternative seed for single-minimum spectra: keep the main dip and place
// the second at the deepest point of the single-dip residual.
std::optional<FitParams> shoulder_seed(const SpectrumSamples& samples, const Seed& seed) {
  const auto& nu = samples.nu;
  const double nu0 = nu[seed.deep_index];
  const double g = seed.params.gamma;
  std::vector<double> resid(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double u = nu[i] - nu0;
    const double model = seed.params.baseline - seed.deep_depth * g * g / (u * u + g * g);
    resid[i] = samples.pl[i] - model;
  }
  const auto smooth = moving_average(resid, kSmoothWindow);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    if (std::abs(nu[i] - nu0) < g) continue;
    if (!best || smooth[i] < smooth[*best]) best = i;
  }
  if (!best || !(smooth[*best] < 0.0)) return std::nullopt;
  FitParams p = seed.params;
  const double other = nu[*best];
  const double other_depth = -smooth[*best];
  if (other > nu0) {
    p.nu_plus = other;
    p.depth_plus = other_depth;
    p.nu_minus = nu0;
    p.depth_minus = seed.deep_depth;
  } else {
    p.nu_minus = other;
    p.depth_minus = other_depth;
    p.nu_plus = nu0;
    p.depth_plus = seed.deep_depth;
  }
  return p;
}

class Problem {
 public:
  Problem(const SpectrumSamples& s, const FitOptions& opt)
      : samples_(s), model_(opt.independent_widths), min_gamma_(mean_step(s) / 10.0) {}

  const DualLorentzian& model() const { return model_; }
  std::size_t rows() const { return samples_.size(); }
  bool weighted() const { return !samples_.sigma.empty(); }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows()));
    for (std::size_t i = 0; i < rows(); ++i) {
      r(static_cast<Eigen::Index>(i)) = (model_.value(x, samples_.nu[i]) - samples_.pl[i]) / weight(i);
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(rows()), model_.size());
    for (std::size_t i = 0; i < rows(); ++i) {
      j.row(static_cast<Eigen::Index>(i)) = model_.gradient(x, samples_.nu[i]).transpose() / weight(i);
    }
    return j;
  }

  // Bounds: widths >= grid step / 10, depths >= 0, nu_plus >= nu_minus
  // (dips swap labels when crossed).
  void project(Eigen::VectorXd& x) const {
    using I = DualLorentzian;
    x(I::kGammaPlus) = std::max(x(I::kGammaPlus), min_gamma_);
    if (model_.independent_widths()) x(I::kGammaMinus) = std::max(x(I::kGammaMinus), min_gamma_);
    x(I::kDepthPlus) = std::max(x(I::kDepthPlus), 0.0);
    x(I::kDepthMinus) = std::max(x(I::kDepthMinus), 0.0);
    if (x(I::kNuPlus) < x(I::kNuMinus)) {
      std::swap(x(I::kNuPlus), x(I::kNuMinus));
      std::swap(x(I::kDepthPlus), x(I::kDepthMinus));
      if (model_.independent_widths()) std::swap(x(I::kGammaPlus), x(I::kGammaMinus));
    }
  }

  // Cost resolution limited by rounding in the model evaluation.
  double rounding_floor(const Eigen::VectorXd& x, const Eigen::VectorXd& r) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
      acc += std::abs(r(static_cast<Eigen::Index>(i)) * model_.value(x, samples_.nu[i])) / weight(i);
    }
    return 4.0 * std::numeric_limits<double>::epsilon() * acc;
  }

 private:
  double weight(std::size_t i) const { return samples_.sigma.empty() ? 1.0 : samples_.sigma[i]; }

  const SpectrumSamples& samples_;
  DualLorentzian model_;
  double min_gamma_;
};

void finish(const Problem& prob, const Eigen::VectorXd& x, FitResult& res);

FitResult run_lm(const Problem& prob, Eigen::VectorXd x, const FitOptions& opt) {
  prob.project(x);

  Eigen::VectorXd r = prob.residuals(x);
  double cost = r.squaredNorm();
  Eigen::MatrixXd jac = prob.jacobian(x);
  double damping = opt.initial_damping;

  FitResult res;
  res.termination = Termination::MaxIterations;
  int iter = 0;
  while (iter < opt.max_iterations) {
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.cwiseAbs().maxCoeff() < opt.grad_tol) {
      res.termination = Termination::Gradient;
      res.converged = true;
      break;
    }
    ++iter;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd diag = jtj.diagonal();
    const double diag_floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(diag_floor);
    Eigen::MatrixXd lhs = jtj;
    lhs.diagonal() += damping * diag;
    const Eigen::VectorXd delta = lhs.ldlt().solve(-grad);

    Eigen::VectorXd trial = x + delta;
    prob.project(trial);
    const Eigen::VectorXd r_trial = prob.residuals(trial);
    const double cost_trial = r_trial.squaredNorm();

    if (std::isfinite(cost_trial) && cost_trial < cost) {
      const double rel = (cost - cost_trial) / std::max(cost, 1e-300);
      x = trial;
      r = r_trial;
      cost = cost_trial;
      jac = prob.jacobian(x);
      res.accepted_costs.push_back(cost);
      damping = std::max(damping / opt.damping_down, 1e-300);
      if (rel < opt.rel_cost_tol) {
        res.termination = Termination::CostChange;
        res.converged = true;
        break;
      }
    } else {
      damping *= opt.damping_up;
      if (damping > kMaxDamping) {
        // No step decreases the cost. Accept the point when even the
        // undamped Gauss-Newton step predicts a decrease the cost evaluation
        // cannot resolve.
        res.termination = Termination::Stagnation;
        const Eigen::VectorXd g = jac.transpose() * r;
        const Eigen::VectorXd gn = (jac.transpose() * jac).completeOrthogonalDecomposition().solve(-g);
        const double predicted = -g.dot(gn);
        const double resolvable = std::max(opt.rel_cost_tol * cost, prob.rounding_floor(x, r));
        res.converged = predicted <= resolvable;
        break;
      }
    }
  }

  res.iterations = iter;
  finish(prob, x, res);
  return res;
}

// A dip whose depth fell to zero has no defined position. Move it onto the
// surviving dip and share the depth evenly, which leaves the model unchanged.
void collapse_vanished_dip(const Problem& prob, FitResult& res) {
  const auto& model = prob.model();
  FitParams p = res.params;
  const double hi = std::max(p.depth_plus, p.depth_minus);
  const double lo = std::min(p.depth_plus, p.depth_minus);
  if (!(hi > 0.0) || lo > kVanishedDepth * hi) return;
  const bool plus_survives = p.depth_plus >= p.depth_minus;
  const double nu = plus_survives ? p.nu_plus : p.nu_minus;
  if (p.gamma_minus) {
    const double w = plus_survives ? p.gamma : *p.gamma_minus;
    p.gamma = w;
    p.gamma_minus = w;
  }
  p.nu_plus = p.nu_minus = nu;
  p.depth_plus = p.depth_minus = 0.5 * (hi + lo);
  finish(prob, model.pack(p), res);
  res.single_line = true;
}

void finish(const Problem& prob, const Eigen::VectorXd& x, FitResult& res) {
  const auto& model = prob.model();
  const int p = model.size();
  const Eigen::VectorXd r = prob.residuals(x);
  const double cost = r.squaredNorm();
  const Eigen::MatrixXd jac = prob.jacobian(x);
  res.params = model.unpack(x);
  res.cost = cost;
  res.residual_rms = std::sqrt(cost / static_cast<double>(prob.rows()));
  if (!std::isfinite(res.residual_rms)) res.converged = false;

  // Linearized covariance via a pseudo-inverse of J^T J.
  res.rank_deficient = false;
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jtj);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < p; ++k) {
    if (ev(k) > cutoff) {
      inv(k) = 1.0 / ev(k);
    } else {
      res.rank_deficient = true;
    }
  }
  Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const auto dof = static_cast<double>(prob.rows()) - p;
  if (!prob.weighted() && dof > 0) cov *= cost / dof;
  res.covariance = cov;
  Eigen::VectorXd sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.uncertainties = model.unpack(sd);
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Gradient:
      return "gradient";
    case Termination::CostChange:
      return "cost_change";
    case Termination::Stagnation:
      return "stagnation";
    case Termination::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

double FitResult::correlation(int i, int j) const {
  const double denom = std::sqrt(covariance(i, i) * covariance(j, j));
  return denom > 0.0 ? covariance(i, j) / denom : 0.0;
}

FitParams params_from_model(const SpectrumModel& model) {
  const auto f = transition_frequencies(model.d, model.amps);
  const auto alpha = model_amplitudes(model);
  FitParams p;
  p.nu_plus = f.nu_plus;
  p.nu_minus = f.nu_minus;
  p.depth_plus = model.a * alpha.alpha_plus / model.gamma;
  p.depth_minus = model.a * alpha.alpha_minus / model.gamma;
  p.gamma = model.gamma;
  p.baseline = model.baseline;
  return p;
}

Eigen::VectorXd DualLorentzian::pack(const FitParams& p) const {
  Eigen::VectorXd x(size());
  x(kNuPlus) = p.nu_plus;
  x(kNuMinus) = p.nu_minus;
  x(kDepthPlus) = p.depth_plus;
  x(kDepthMinus) = p.depth_minus;
  x(kGammaPlus) = p.gamma;
  x(kBaseline) = p.baseline;
  if (independent_) x(kGammaMinus) = p.width_minus();
  return x;
}

FitParams DualLorentzian::unpack(const Eigen::VectorXd& x) const {
  FitParams p;
  p.nu_plus = x(kNuPlus);
  p.nu_minus = x(kNuMinus);
  p.depth_plus = x(kDepthPlus);
  p.depth_minus = x(kDepthMinus);
  p.gamma = x(kGammaPlus);
  p.baseline = x(kBaseline);
  if (independent_) p.gamma_minus = x(kGammaMinus);
  return p;
}

double DualLorentzian::value(const Eigen::VectorXd& x, double nu) const {
  const double gp = x(kGammaPlus);
  const double gm = independent_ ? x(kGammaMinus) : gp;
  const double up = nu - x(kNuPlus);
  const double um = nu - x(kNuMinus);
  return x(kBaseline) - x(kDepthPlus) * gp * gp / (up * up + gp * gp) -
         x(kDepthMinus) * gm * gm / (um * um + gm * gm);
}

Eigen::VectorXd DualLorentzian::gradient(const Eigen::VectorXd& x, double nu) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(size());
  const double gp = x(kGammaPlus);
  const double gm = independent_ ? x(kGammaMinus) : gp;
  const double up = nu - x(kNuPlus);
  const double um = nu - x(kNuMinus);
  const double qp = up * up + gp * gp;
  const double qm = um * um + gm * gm;
  const double dp = x(kDepthPlus);
  const double dm = x(kDepthMinus);

  g(kNuPlus) = -dp * 2.0 * up * gp * gp / (qp * qp);
  g(kNuMinus) = -dm * 2.0 * um * gm * gm / (qm * qm);
  g(kDepthPlus) = -gp * gp / qp;
  g(kDepthMinus) = -gm * gm / qm;
  const double dwidth_p = -dp * 2.0 * gp * up * up / (qp * qp);
  const double dwidth_m = -dm * 2.0 * gm * um * um / (qm * qm);
  if (independent_) {
    g(kGammaPlus) = dwidth_p;
    g(kGammaMinus) = dwidth_m;
  } else {
    g(kGammaPlus) = dwidth_p + dwidth_m;
  }
  g(kBaseline) = 1.0;
  return g;
}

FitParams initial_guess(const SpectrumSamples& samples) { return make_seed(samples).params; }

FitResult fit_dual_lorentzian(const SpectrumSamples& samples,
                              const std::optional<FitParams>& guess,
                              const FitOptions& options) {
  samples.validate();
  const Problem prob(samples, options);
  const auto& model = prob.model();

  if (guess) {
    FitResult res = run_lm(prob, model.pack(*guess), options);
    collapse_vanished_dip(prob, res);
    return res;
  }

  const Seed seed = make_seed(samples);
  FitResult best = run_lm(prob, model.pack(seed.params), options);
  if (seed.single_dip) {
    if (auto alt = shoulder_seed(samples, seed)) {
      FitResult other = run_lm(prob, model.pack(*alt), options);
      const bool better = (other.converged && !best.converged) ||
                          (other.converged == best.converged && other.cost < best.cost);
      if (better) best = std::move(other);
    }
  }
  collapse_vanished_dip(prob, best);
  return best;
}

std::vector<FitResult> fit_batch(std::span<const SpectrumSamples> spectra,
                                 const FitOptions& options, unsigned threads) {
  std::vector<FitResult> out(spectra.size());
  std::vector<std::exception_ptr> errors(spectra.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, spectra.size())));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spectra.size(); i = next++) {
      try {
        out[i] = fit_dual_lorentzian(spectra[i], std::nullopt, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  if (w > std::numbers::pi) w -= two_pi;
  return w;
}

StrainEstimate invert_to_strain(const FitResult& fit, double d, std::optional<double> phi_mw,
                                PhaseConvention convention) {
  if (!fit.converged) throw FitError("invert_to_strain: fit did not converge");
  const auto& p = fit.params;
  const double total = p.depth_plus + p.depth_minus;
  if (!(total > 0.0)) throw FitError("invert_to_strain: total dip depth is zero");

  StrainEstimate est;
  est.m_z_hat = 0.5 * (p.nu_plus + p.nu_minus) - d;
  est.m_perp_hat = 0.5 * (p.nu_plus - p.nu_minus);
  est.imbalance_hat = std::clamp((p.depth_plus - p.depth_minus) / total, -1.0, 1.0);
  est.phase_sum_hat = std::acos(est.imbalance_hat);
  est.ambiguous = est.phase_sum_hat != 0.0 && est.phase_sum_hat != std::numbers::pi;
  est.single_line = fit.single_line;
  if (phi_mw && !fit.single_line) {
    const double twice = 2.0 * *phi_mw;
    const double s = est.phase_sum_hat;
    if (convention == PhaseConvention::Sum) {
      est.phi_str_hat = std::array<double, 2>{wrap_angle(s - twice), wrap_angle(-s - twice)};
    } else {
      est.phi_str_hat = std::array<double, 2>{wrap_angle(twice - s), wrap_angle(twice + s)};
    }
  }
  return est;
}

}  // namespace nvstrain
