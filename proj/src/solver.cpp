#include "noisyerm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace noisyerm {

void SolveConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("SolveConfig: max_iters must be >= 1");
  if (!(grad_tol > 0.0) || !(divergence_norm > 0.0) || !(objective_tol > 0.0))
    throw std::invalid_argument("SolveConfig: tolerances must be positive");
  if (trace_every < 1 || divergence_window < 2)
    throw std::invalid_argument("SolveConfig: trace_every >= 1 and divergence_window >= 2 required");
}

std::string_view to_string(FitStatus status) {
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::diverged: return "diverged";
    case FitStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

MarginObjective::MarginObjective(const LossSpec& loss, MatrixXd signed_features, double pos_weight,
                                 double neg_weight)
    : loss_(loss), z_(std::move(signed_features)), pos_weight_(pos_weight), neg_weight_(neg_weight) {
  if (z_.rows() < 1) throw std::invalid_argument("MarginObjective: empty data");
}

double MarginObjective::value(const Eigen::Ref<const VectorXd>& w) const {
  const VectorXd m = z_ * w;
  double sum = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    double v = pos_weight_ * loss_.eval(m(i));
    if (neg_weight_ != 0.0) v += neg_weight_ * loss_.eval(-m(i));
    sum += v;
  }
  return sum / static_cast<double>(m.size());
}

double MarginObjective::value_and_gradient(const Eigen::Ref<const VectorXd>& w, VectorXd& grad) const {
  const VectorXd m = z_ * w;
  VectorXd slope(m.size());
  double sum = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    double v = pos_weight_ * loss_.eval(m(i));
    double s = pos_weight_ * loss_.subgrad(m(i));
    if (neg_weight_ != 0.0) {
      v += neg_weight_ * loss_.eval(-m(i));
      s -= neg_weight_ * loss_.subgrad(-m(i));
    }
    sum += v;
    slope(i) = s;
  }
  const double inv_n = 1.0 / static_cast<double>(m.size());
  grad.noalias() = z_.transpose() * slope;
  grad *= inv_n;
  return sum * inv_n;
}

bool MarginObjective::certifies_unbounded_ray(const Eigen::Ref<const VectorXd>& w) const {
  if (neg_weight_ != 0.0 || !loss_.infimum_unattained()) return false;
  return ((z_ * w).array() > 0.0).all();
}

DivergenceVerdict detect_divergence(const DivergenceEvidence& ev) {
  if (ev.w_norms.empty() || ev.objectives.empty()) return DivergenceVerdict::not_diverged;
  if (ev.grad_tol_met || ev.w_norms.back() < ev.divergence_norm) return DivergenceVerdict::not_diverged;
  const std::size_t k = std::min<std::size_t>({static_cast<std::size_t>(ev.window), ev.w_norms.size(),
                                               ev.objectives.size()});
  if (k < 2) return DivergenceVerdict::not_diverged;
  const std::size_t n0 = ev.w_norms.size() - k;
  const std::size_t f0 = ev.objectives.size() - k;
  for (std::size_t i = 1; i < k; ++i) {
    if (ev.w_norms[n0 + i] < ev.w_norms[n0 + i - 1]) return DivergenceVerdict::not_diverged;
    if (ev.objectives[f0 + i] > ev.objectives[f0 + i - 1]) return DivergenceVerdict::not_diverged;
  }
  // An objective that has underflowed to zero is still being driven down.
  const bool still_dropping = ev.objectives[f0] > ev.objectives.back() || ev.objectives.back() == 0.0;
  return still_dropping ? DivergenceVerdict::diverged : DivergenceVerdict::not_diverged;
}

namespace {

class Recorder {
 public:
  Recorder(const SolveConfig& cfg, FitResult& out) : cfg_(cfg), out_(out) {}

  void push(int iter, double w_norm, double objective) {
    if (iter % cfg_.trace_every == 0) {
      out_.w_norm_trace.push_back(w_norm);
      out_.objective_trace.push_back(objective);
    }
    recent_norms_.push_back(w_norm);
    recent_objectives_.push_back(objective);
    const auto cap = static_cast<std::size_t>(cfg_.divergence_window);
    while (recent_norms_.size() > cap) recent_norms_.pop_front();
    while (recent_objectives_.size() > cap) recent_objectives_.pop_front();
  }

  bool diverged(bool grad_tol_met) const {
    DivergenceEvidence ev{{recent_norms_.begin(), recent_norms_.end()},
                          {recent_objectives_.begin(), recent_objectives_.end()},
                          grad_tol_met,
                          cfg_.divergence_norm,
                          cfg_.divergence_window};
    return detect_divergence(ev) == DivergenceVerdict::diverged;
  }

  void finish(int iter, double w_norm, double objective) {
    if (iter % cfg_.trace_every != 0) {
      out_.w_norm_trace.push_back(w_norm);
      out_.objective_trace.push_back(objective);
    }
  }

 private:
  const SolveConfig& cfg_;
  FitResult& out_;
  std::deque<double> recent_norms_;
  std::deque<double> recent_objectives_;
};

void require_finite(double f) {
  if (!std::isfinite(f)) throw std::runtime_error("solver: non-finite objective");
}

VectorXd starting_point(const MarginObjective& obj, const SolveConfig& cfg) {
  if (!cfg.init) return VectorXd::Zero(obj.dim());
  if (cfg.init->size() != obj.dim()) throw std::invalid_argument("solver: init has the wrong dimension");
  return *cfg.init;
}

FitResult minimize_smooth(const MarginObjective& obj, const SolveConfig& cfg) {
  constexpr double kArmijo = 1e-4;
  constexpr double kFlat = 1e-14;
  FitResult out;
  Recorder rec(cfg, out);

  VectorXd w = starting_point(obj, cfg);
  VectorXd g(obj.dim());
  double f = obj.value_and_gradient(w, g);
  require_finite(f);

  VectorXd w_prev, g_prev, w_try, g_try(obj.dim());
  double step = 1.0;
  int iter = 0;
  for (;; ++iter) {
    const double gn = g.norm();
    const double wn = w.norm();
    rec.push(iter, wn, f);
    if (!out.first_crossing && wn >= cfg.divergence_norm) out.first_crossing = w;
    const bool small_grad = gn <= cfg.grad_tol;
    // A vanishing gradient on separable data is not stationarity: the
    // objective keeps decreasing along the ray through w.
    const bool on_ray = small_grad && wn > 0.0 && obj.certifies_unbounded_ray(w);
    const bool grad_met = small_grad && !on_ray;

    if (wn >= cfg.divergence_norm && rec.diverged(grad_met)) {
      out.status = FitStatus::diverged;
      break;
    }
    if (small_grad) {
      if (on_ray && iter < cfg.max_iters) {
        w_try = 2.0 * w;
        const double f_try = obj.value_and_gradient(w_try, g_try);
        if (std::isfinite(f_try) && f_try <= f) {
          w_prev = w;
          g_prev = g;
          w.swap(w_try);
          g.swap(g_try);
          f = f_try;
          continue;
        }
      }
      out.status = on_ray ? FitStatus::iteration_limit : FitStatus::converged;
      break;
    }
    if (iter >= cfg.max_iters) {
      out.status = FitStatus::iteration_limit;
      break;
    }

    double trial = 1.0;
    if (w_prev.size() == w.size()) {
      const VectorXd s = w - w_prev;
      const VectorXd dy = g - g_prev;
      const double sy = s.dot(dy);
      trial = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    }
    double t = trial;
    bool accepted = false;
    double f_try = f;
    for (int bt = 0; bt < 200; ++bt) {
      w_try = w - t * g;
      f_try = obj.value_and_gradient(w_try, g_try);
      if (!std::isfinite(f_try)) {
        t *= 0.5;
        continue;
      }
      if (f_try <= f - kArmijo * t * gn * gn) {
        accepted = true;
        break;
      }
      // Below the rounding level of f, fall back on the gradient norm.
      if (f_try <= f + kFlat * std::abs(f) && g_try.norm() < gn) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No representable decrease left along -g.
      out.status = FitStatus::iteration_limit;
      break;
    }
    step = t;
    w_prev = w;
    g_prev = g;
    w.swap(w_try);
    g.swap(g_try);
    f = f_try;
  }
  out.w = w;
  out.objective = f;
  out.grad_norm = g.norm();
  out.iters = iter;
  rec.finish(iter, out.w.norm(), f);
  return out;
}

FitResult minimize_subgradient(const MarginObjective& obj, const SolveConfig& cfg) {
  // Normalized steps scale / sqrt(k). When the best objective stops
  // improving by objective_tol for a full window, restart from the best
  // iterate with half the scale; a vanishing scale means convergence.
  constexpr int kStallWindow = 200;
  constexpr double kMinScale = 1e-9;
  FitResult out;
  Recorder rec(cfg, out);

  VectorXd w = starting_point(obj, cfg);
  VectorXd g(obj.dim());
  VectorXd best_w = w;
  VectorXd best_g(obj.dim());
  double best_f = obj.value_and_gradient(w, best_g);
  require_finite(best_f);
  double f = best_f;
  g = best_g;

  double scale = std::max(1.0, w.norm());
  int k = 1;
  int last_improvement = 0;
  double improvement_anchor = best_f;
  int iter = 0;
  out.status = FitStatus::iteration_limit;
  for (;; ++iter) {
    const double gn = g.norm();
    const double wn = w.norm();
    rec.push(iter, wn, f);
    if (!out.first_crossing && wn >= cfg.divergence_norm) out.first_crossing = w;
    if (f < best_f) {
      best_f = f;
      best_w = w;
      best_g = g;
    }
    if (improvement_anchor - best_f > cfg.objective_tol) {
      improvement_anchor = best_f;
      last_improvement = iter;
    }
    if (gn == 0.0) {
      best_w = w;
      best_f = f;
      best_g = g;
      out.status = FitStatus::converged;
      break;
    }
    if (wn >= cfg.divergence_norm && rec.diverged(false)) {
      out.status = FitStatus::diverged;
      best_w = w;
      best_f = f;
      best_g = g;
      break;
    }
    if (iter >= cfg.max_iters) break;
    if (iter - last_improvement >= kStallWindow) {
      scale *= 0.5;
      if (scale < kMinScale) {
        out.status = FitStatus::converged;
        break;
      }
      w = best_w;
      k = 1;
      last_improvement = iter;
      f = obj.value_and_gradient(w, g);
      continue;
    }
    w -= (scale / std::sqrt(static_cast<double>(k))) * (g / gn);
    ++k;
    f = obj.value_and_gradient(w, g);
    require_finite(f);
  }
  out.w = best_w;
  out.objective = best_f;
  out.grad_norm = best_g.norm();
  out.iters = iter;
  rec.finish(iter, out.w.norm(), best_f);
  return out;
}

}  // namespace

FitResult minimize(const MarginObjective& objective, const SolveConfig& cfg) {
  cfg.validate();
  const StepRule rule = cfg.step_rule.value_or(objective.loss().smooth() ? StepRule::backtracking_armijo
                                                                         : StepRule::diminishing_subgradient);
  return rule == StepRule::backtracking_armijo ? minimize_smooth(objective, cfg)
                                               : minimize_subgradient(objective, cfg);
}

FitResult fit_erm(const LossSpec& loss, const Dataset& ds, bool use_corrupted, const SolveConfig& cfg) {
  const VectorXd& labels = use_corrupted ? ds.y_tilde() : ds.y();
  if (cfg.init && cfg.init->size() != ds.dim()) throw std::invalid_argument("fit_erm: init has the wrong dimension");
  const MarginObjective objective(loss, labels.asDiagonal() * ds.x(), 1.0, 0.0);
  return minimize(objective, cfg);
}

FitResult fit_population_saa(const LossSpec& loss, const PopulationSample& sample, double rho,
                             const SolveConfig& cfg) {
  require_valid_rho(rho);
  const MarginObjective objective(loss, sample.signed_features(), 1.0 - rho, rho);
  return minimize(objective, cfg);
}

FitResult fit_population_saa(const LossSpec& loss, const DataModel& model, double rho, Index saa_samples,
                             std::uint64_t seed, const SolveConfig& cfg) {
  if (saa_samples < 10000) throw std::invalid_argument("fit_population_saa: needs at least 1e4 samples");
  return fit_population_saa(loss, draw_population_sample(model, saa_samples, seed), rho, cfg);
}

}  // namespace noisyerm
