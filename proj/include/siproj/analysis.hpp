#pragma once

// Norm-growth recurrences, the asymptotic momentum/GD ratio, effective step
// sizes, and certification of logged runs against the closed-form identities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siproj/core.hpp"
#include "siproj/optimizers.hpp"

namespace siproj {

// ---------------------------------------------------------------------------
// Recurrences

/// |w_{t+1}|^2 for GD on a scale-invariant block.
inline double recur_gd(double norm_sq, double lr, double p_norm_sq) { return norm_sq + lr * lr * p_norm_sq; }

/// Squared-norm recurrence for heavy-ball momentum on a scale-invariant block.
///
/// `tail` holds sum_{k<t} beta^{t-k} lr_k |p_k|^2, which equals -w_t . p_t.
/// With a constant learning rate the increment lr^2 |p_t|^2 + 2 lr tail is the
/// closed form lr^2 |p_t|^2 + 2 lr^2 sum_{k<t} beta^{t-k} |p_k|^2.
struct NormRecurrence {
  double beta = 0.0;
  double norm_sq = 0.0;
  double tail = 0.0;
  std::vector<double> history;  // |p_k|^2 fed so far

  static NormRecurrence gd(double norm_sq) { return {0.0, norm_sq, 0.0, {}}; }
  static NormRecurrence momentum(double beta, double norm_sq) {
    if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("momentum recurrence: beta must lie in [0, 1)");
    return {beta, norm_sq, 0.0, {}};
  }

  /// Predicted w_t . p_t at the current step.
  [[nodiscard]] double predicted_w_dot_p() const noexcept { return -tail; }
};

inline NormRecurrence recur_momentum(NormRecurrence state, double lr, double beta, double p_norm_sq) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("recur_momentum: beta must lie in [0, 1)");
  state.beta = beta;
  state.norm_sq = (state.norm_sq + lr * lr * p_norm_sq) + 2.0 * lr * state.tail;
  state.tail = beta * (state.tail + lr * p_norm_sq);
  state.history.push_back(p_norm_sq);
  return state;
}

/// Limit of the momentum-to-GD squared-norm growth ratio: 1 + 2 beta / (1 - beta).
inline double asymptotic_ratio(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("asymptotic_ratio: beta must lie in [0, 1)");
  return 1.0 + 2.0 * beta / (1.0 - beta);
}

/// Feeds one shared sequence of |p_k|^2 into both the GD and the momentum
/// recurrence and returns (|w_t^GDM|^2 - |w_0|^2) / (|w_t^GD|^2 - |w_0|^2)
/// for t = 1..steps. Entries beyond the sequence are treated as zero.
inline std::vector<double> ratio_convergence_sim(double beta, std::span<const double> p_norm_sq, std::size_t steps) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("ratio_convergence_sim: beta must lie in [0, 1)");
  if (p_norm_sq.empty() || !(p_norm_sq[0] > 0.0)) {
    throw DomainError("ratio_convergence_sim: first update norm must be positive");
  }
  for (double a : p_norm_sq) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("ratio_convergence_sim: norms must be finite and >= 0");
  }
  double gd = 0.0;
  NormRecurrence gdm = NormRecurrence::momentum(beta, 0.0);
  std::vector<double> ratios;
  ratios.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double a = t < p_norm_sq.size() ? p_norm_sq[t] : 0.0;
    gd = recur_gd(gd, 1.0, a);
    gdm.history.clear();  // unbounded runs need no history
    gdm = recur_momentum(std::move(gdm), 1.0, beta, a);
    ratios.push_back(gdm.norm_sq / gd);
  }
  return ratios;
}

// ---------------------------------------------------------------------------
// Effective step size

struct EffectiveStep {
  double exact = 0.0;   // |w_next/|w_next| - w_prev/|w_prev||
  double approx = 0.0;  // |w_next - w_prev| / |w_next|
};

inline EffectiveStep effective_step(const Vec& w_prev, const Vec& w_next) {
  require_same_size("effective_step", w_prev.size(), w_next.size());
  const double n_next = l2_norm(w_next);
  if (n_next == 0.0 || l2_norm(w_prev) == 0.0) throw ZeroNorm("effective_step");
  return {l2_norm(unit(w_next) - unit(w_prev)), l2_norm(w_next - w_prev) / n_next};
}

/// Determinant of the Gram matrix of the unit vectors of a, b, c: zero iff
/// the three directions are coplanar, one for mutually orthogonal vectors.
inline double normalized_gram_determinant(const Vec& a, const Vec& b, const Vec& c) {
  const Vec u[3] = {unit(a), unit(b), unit(c)};
  double g[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g[i][j] = dot(u[i], u[j]);
  const double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                     g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                     g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
  return std::abs(det);
}

// ---------------------------------------------------------------------------
// Trajectories

/// One optimizer step on one parameter block. The first eight fields form the
/// trajectory CSV; the rest feed certification.
struct TrajectoryRecord {
  std::size_t step = 0;
  double weight_norm = 0.0;     // |w_{t+1}|
  double effective_step = 0.0;  // |w_hat_{t+1} - w_hat_t|
  double cosine_wg = 0.0;       // |cos(w_t, grad_t)|, largest over slices
  double objective = 0.0;       // f(w_t)
  bool projected = false;
  double raw_update_norm = 0.0;
  double applied_update_norm = 0.0;

  double prev_weight_norm = 0.0;  // |w_t|
  double lr = 0.0;
  double w_dot_raw = 0.0;
  double w_dot_applied = 0.0;
  std::optional<double> coplanarity;  // worst Gram determinant over projected slices
  bool same_side = true;
};

/// Builds the record for the step w_prev -> w_next described by `rep`.
inline TrajectoryRecord record_step(std::size_t t, const Vec& w_prev, const Vec& w_next, const StepReport& rep,
                                    double objective, double lr) {
  TrajectoryRecord r;
  r.step = t;
  r.weight_norm = l2_norm(w_next);
  r.prev_weight_norm = l2_norm(w_prev);
  r.effective_step = effective_step(w_prev, w_next).exact;
  r.cosine_wg = rep.cosine;
  r.objective = objective;
  r.projected = rep.projected;
  r.raw_update_norm = rep.raw_update_norm;
  r.applied_update_norm = rep.applied_update_norm;
  r.lr = lr;
  r.w_dot_raw = rep.w_dot_raw;
  r.w_dot_applied = rep.w_dot_applied;

  for (const SliceReport& s : rep.slices) {
    if (!s.projected || s.range.size() < 3) continue;
    const Vec w = w_prev.slice(s.range.begin, s.range.end);
    const Vec p = rep.raw_update.slice(s.range.begin, s.range.end);
    const Vec q = rep.applied_update.slice(s.range.begin, s.range.end);
    const Vec unprojected = w - lr * p;
    const Vec projected = w - lr * q;
    if (l2_norm(unprojected) == 0.0 || l2_norm(projected) == 0.0 || l2_norm(p) == 0.0) continue;
    const double gram = normalized_gram_determinant(w, unprojected, projected);
    r.coplanarity = std::max(r.coplanarity.value_or(0.0), gram);
    const Vec w_hat = unit(w);
    if (dot(unit(projected) - w_hat, unit(unprojected) - w_hat) < 0.0) r.same_side = false;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Certification

enum class CheckStatus { Pass, Fail, NotApplicable };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::NotApplicable: return "not-applicable";
  }
  return "?";
}

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::NotApplicable;
  double max_residual = 0.0;
  std::size_t steps_checked = 0;
  std::string note{};
};

struct CertificationReport {
  std::vector<CheckResult> checks;

  [[nodiscard]] bool passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == CheckStatus::Fail; });
  }

  [[nodiscard]] const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// Optimizer settings the certification needs to decide which identities
/// apply to a run.
struct RunContext {
  OptimizerKind kind = OptimizerKind::GD;
  double momentum = 0.0;
  bool nesterov = false;
  double weight_decay = 0.0;
};

inline constexpr double kResidualFloor = 1e-12;

inline double relative_residual(double actual, double expected) {
  return std::abs(actual - expected) / std::max(std::abs(expected), kResidualFloor);
}

namespace detail {

inline CheckResult finish(CheckResult c, double tolerance) {
  if (c.steps_checked == 0) {
    c.status = CheckStatus::NotApplicable;
  } else {
    c.status = c.max_residual <= tolerance ? CheckStatus::Pass : CheckStatus::Fail;
  }
  return c;
}

inline CheckResult not_applicable(std::string name, std::string note) {
  CheckResult c;
  c.name = std::move(name);
  c.note = std::move(note);
  return c;
}

}  // namespace detail

/// Checks a run on a declared scale-invariant block against:
///   weight_gradient_orthogonality  |cos(w_t, grad_t)| <= tol
///   gd_norm_growth                 |w_{t+1}|^2 = |w_t|^2 + lr^2 |p_t|^2 (replayed)
///   momentum_norm_growth           squared-norm recurrence with the beta tail (replayed)
///   orthogonality_ledger           w_t . p_t = -sum_{k<t} beta^{t-k} lr_k |p_k|^2
///   projected_norm_growth          |w_{t+1}|^2 - |w_t|^2 = lr^2 |q_t|^2 and |q_t| <= |p_t|
///   projection_coplanarity         w_t, unprojected and projected iterates coplanar, same side
/// Residuals are relative with an absolute floor; identities whose premises do
/// not hold for the run are reported not-applicable.
inline CertificationReport certify_trajectory(std::span<const TrajectoryRecord> records, const RunContext& ctx,
                                              double tolerance) {
  CertificationReport report;
  const bool decay_free = ctx.weight_decay == 0.0;
  const bool heavy_ball = ctx.kind == OptimizerKind::GD || (ctx.kind == OptimizerKind::Momentum && !ctx.nesterov);
  const double beta = ctx.kind == OptimizerKind::GD ? 0.0 : ctx.momentum;

  {
    CheckResult c{.name = "weight_gradient_orthogonality"};
    for (const auto& r : records) {
      c.max_residual = std::max(c.max_residual, r.cosine_wg);
      ++c.steps_checked;
    }
    report.checks.push_back(detail::finish(c, tolerance));
  }

  const bool plain_gd = ctx.kind == OptimizerKind::GD || (ctx.kind == OptimizerKind::Momentum && beta == 0.0 && !ctx.nesterov);
  if (plain_gd && decay_free && !records.empty()) {
    CheckResult c{.name = "gd_norm_growth"};
    double n = records.front().prev_weight_norm * records.front().prev_weight_norm;
    for (const auto& r : records) {
      n = recur_gd(n, r.lr, r.raw_update_norm * r.raw_update_norm);
      c.max_residual = std::max(c.max_residual, relative_residual(r.weight_norm * r.weight_norm, n));
      ++c.steps_checked;
    }
    report.checks.push_back(detail::finish(c, tolerance));
  } else {
    report.checks.push_back(detail::not_applicable("gd_norm_growth", "requires plain GD without weight decay"));
  }

  if (heavy_ball && decay_free && !records.empty()) {
    CheckResult growth{.name = "momentum_norm_growth"};
    CheckResult ledger{.name = "orthogonality_ledger"};
    const double n0 = records.front().prev_weight_norm * records.front().prev_weight_norm;
    NormRecurrence rec = NormRecurrence::momentum(beta, n0);
    for (const auto& r : records) {
      const double expected_dot = rec.predicted_w_dot_p();
      const double ledger_res = expected_dot == 0.0
                                    ? std::abs(r.w_dot_raw) / std::max(r.prev_weight_norm * r.raw_update_norm, kResidualFloor)
                                    : relative_residual(r.w_dot_raw, expected_dot);
      ledger.max_residual = std::max(ledger.max_residual, ledger_res);
      ++ledger.steps_checked;
      rec = recur_momentum(std::move(rec), r.lr, beta, r.raw_update_norm * r.raw_update_norm);
      growth.max_residual = std::max(growth.max_residual, relative_residual(r.weight_norm * r.weight_norm, rec.norm_sq));
      ++growth.steps_checked;
    }
    report.checks.push_back(detail::finish(growth, tolerance));
    report.checks.push_back(detail::finish(ledger, tolerance));
  } else {
    report.checks.push_back(
        detail::not_applicable("momentum_norm_growth", "requires heavy-ball momentum without weight decay"));
    report.checks.push_back(
        detail::not_applicable("orthogonality_ledger", "requires heavy-ball momentum without weight decay"));
  }

  if (is_projected(ctx.kind) && decay_free) {
    CheckResult c{.name = "projected_norm_growth"};
    bool grew = false;
    for (const auto& r : records) {
      if (!r.projected) continue;
      const double expected = r.prev_weight_norm * r.prev_weight_norm + r.lr * r.lr * r.applied_update_norm * r.applied_update_norm;
      c.max_residual = std::max(c.max_residual, relative_residual(r.weight_norm * r.weight_norm, expected));
      if (r.applied_update_norm > r.raw_update_norm * (1.0 + kResidualFloor)) grew = true;
      ++c.steps_checked;
    }
    c = detail::finish(c, tolerance);
    if (grew) {
      c.status = CheckStatus::Fail;
      c.note = "projected update longer than the raw update";
    }
    if (c.steps_checked == 0) c.note = "no step took the projection branch";
    report.checks.push_back(c);
  } else {
    report.checks.push_back(
        detail::not_applicable("projected_norm_growth", "requires SGDP/AdamP without weight decay"));
  }

  {
    CheckResult c{.name = "projection_coplanarity"};
    bool flipped = false;
    for (const auto& r : records) {
      if (!r.coplanarity) continue;
      c.max_residual = std::max(c.max_residual, *r.coplanarity);
      flipped = flipped || !r.same_side;
      ++c.steps_checked;
    }
    c = detail::finish(c, tolerance);
    if (flipped) {
      c.status = CheckStatus::Fail;
      c.note = "projected iterate on the opposite side of the unprojected one";
    }
    if (c.steps_checked == 0) c.note = "no projected slice of dimension >= 3";
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace siproj
