#pragma once

// Step kernels: GD, heavy-ball/Nesterov momentum, Adam, AdamW, and their
// projected counterparts SGDP and AdamP.
//
// The projected variants remove the radial component of the update on every
// scope slice whose weight/gradient cosine falls below delta / sqrt(dim):
//
//   q_t = project_out(w_t, p_t)   if |cos(w_t, grad)| < delta / sqrt(dim)
//   q_t = p_t                     otherwise
//   w_{t+1} = (1 - lr * wd) * w_t - lr * q_t
//
// Kernels mutate the (w, state) pair they are given and nothing else.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "siproj/core.hpp"

namespace siproj {

inline constexpr double kDefaultDelta = 0.1;

struct HyperParams {
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool nesterov = false;
  double delta = kDefaultDelta;
  bool bias_correction = false;

  void validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw DomainError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (!(weight_decay >= 0.0)) throw DomainError("weight decay must be non-negative");
    if (!(delta > 0.0)) throw DomainError("delta must be positive");
  }
};

/// Optimizer buffers for one parameter block, zero-initialized.
struct OptState {
  Vec p;  // momentum buffer
  Vec m;  // first moment
  Vec v;  // second moment, elementwise >= 0
  std::size_t t = 0;

  static OptState zeros(std::size_t d) { return {Vec::zeros(d), Vec::zeros(d), Vec::zeros(d), 0}; }
};

struct SliceReport {
  IndexRange range;
  bool projected = false;
  bool zero_grad = false;
  double cosine = 0.0;     // |cos(w, grad)| on the slice; 0 when zero_grad
  double threshold = 0.0;  // delta / sqrt(slice dim)
};

struct StepReport {
  bool projected = false;  // every slice took the projection branch
  bool zero_grad = false;  // some slice had a zero gradient
  double cosine = 0.0;     // largest slice cosine
  double raw_update_norm = 0.0;      // |p_t|
  double applied_update_norm = 0.0;  // |q_t|
  double w_dot_raw = 0.0;            // w_t . p_t
  double w_dot_applied = 0.0;        // w_t . q_t
  std::vector<SliceReport> slices;
  Vec raw_update;
  Vec applied_update;
};

namespace detail {

inline void check_shapes(const char* where, const Vec& w, const Vec& grad, const OptState* state) {
  require_same_size(where, w.size(), grad.size());
  if (state != nullptr) {
    require_same_size(where, state->p.size(), w.size());
    require_same_size(where, state->m.size(), w.size());
    require_same_size(where, state->v.size(), w.size());
  }
}

inline std::vector<IndexRange> whole(const Vec& w) { return {IndexRange{0, w.size()}}; }

// Per-slice detection and (optional) projection of `update`, in place.
inline std::vector<SliceReport> project_slices(const Vec& w, const Vec& grad, std::vector<double>& update,
                                               std::span<const IndexRange> slices, double delta, bool enabled) {
  std::vector<SliceReport> out;
  out.reserve(slices.size());
  for (const IndexRange& r : slices) {
    const auto ws = w.span().subspan(r.begin, r.size());
    const auto gs = grad.span().subspan(r.begin, r.size());
    SliceReport rep;
    rep.range = r;
    rep.threshold = delta / std::sqrt(static_cast<double>(r.size()));
    if (detail::norm(ws) == 0.0) throw ZeroNorm("projected step: weight slice");
    if (detail::norm(gs) == 0.0) {
      rep.zero_grad = true;
    } else {
      rep.cosine = detail::cosine_abs(ws, gs);
      if (enabled && rep.cosine < rep.threshold) {
        rep.projected = true;
        detail::project_out(ws, std::span<double>(update).subspan(r.begin, r.size()));
      }
    }
    out.push_back(rep);
  }
  return out;
}

// Loggable cosine for kernels without a projection branch.
inline std::vector<SliceReport> observe_slices(const Vec& w, const Vec& grad, std::span<const IndexRange> slices,
                                               double delta) {
  std::vector<SliceReport> out;
  for (const IndexRange& r : slices) {
    const auto ws = w.span().subspan(r.begin, r.size());
    const auto gs = grad.span().subspan(r.begin, r.size());
    SliceReport rep;
    rep.range = r;
    rep.threshold = delta / std::sqrt(static_cast<double>(r.size()));
    if (detail::norm(ws) == 0.0 || detail::norm(gs) == 0.0) {
      rep.zero_grad = detail::norm(gs) == 0.0;
    } else {
      rep.cosine = detail::cosine_abs(ws, gs);
    }
    out.push_back(rep);
  }
  return out;
}

// w <- (1 - lr * wd) * w - lr * q; fills the update-related report fields.
inline StepReport apply_update(Vec& w, const std::vector<double>& raw, const std::vector<double>& applied,
                               std::vector<SliceReport> slices, double lr, double weight_decay) {
  StepReport rep;
  rep.raw_update_norm = detail::norm(raw);
  rep.applied_update_norm = detail::norm(applied);
  rep.w_dot_raw = detail::dot(w.span(), raw);
  rep.w_dot_applied = detail::dot(w.span(), applied);
  rep.projected = !slices.empty();
  for (const auto& s : slices) {
    rep.projected = rep.projected && s.projected;
    rep.zero_grad = rep.zero_grad || s.zero_grad;
    rep.cosine = std::max(rep.cosine, s.cosine);
  }
  rep.slices = std::move(slices);
  rep.raw_update = Vec(raw);
  rep.applied_update = Vec(applied);

  const double shrink = 1.0 - lr * weight_decay;
  std::vector<double> next(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) next[i] = shrink * w[i] - lr * applied[i];
  w = Vec(std::move(next));
  return rep;
}

// p <- beta p + grad; returns the update direction (Nesterov look-ahead when
// requested).
inline std::vector<double> momentum_direction(const Vec& grad, OptState& state, const HyperParams& hp) {
  std::vector<double> buf(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) buf[i] = hp.momentum * state.p[i] + grad[i];
  std::vector<double> dir = buf;
  if (hp.nesterov) {
    for (std::size_t i = 0; i < grad.size(); ++i) dir[i] = grad[i] + hp.momentum * buf[i];
  }
  state.p = Vec(std::move(buf));
  ++state.t;
  return dir;
}

inline std::vector<double> adam_direction(const Vec& grad, OptState& state, const HyperParams& hp) {
  const std::size_t d = grad.size();
  std::vector<double> m(d), v(d), dir(d);
  ++state.t;
  const double c1 = hp.bias_correction ? 1.0 - std::pow(hp.beta1, static_cast<double>(state.t)) : 1.0;
  const double c2 = hp.bias_correction ? 1.0 - std::pow(hp.beta2, static_cast<double>(state.t)) : 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grad[i];
    v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    dir[i] = (m[i] / c1) / (std::sqrt(v[i] / c2) + hp.eps);
  }
  state.m = Vec(std::move(m));
  state.v = Vec(std::move(v));
  return dir;
}

}  // namespace detail

/// w - lr * grad.
inline Vec gd_step(const Vec& w, const Vec& grad, double lr) {
  require_same_size("gd_step", w.size(), grad.size());
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] - lr * grad[i];
  return Vec(std::move(out));
}

/// True iff |cos(w, grad)| < delta / sqrt(dim(w)). Throws ZeroNorm when
/// either vector is zero.
inline bool detect_scale_invariance(const Vec& w, const Vec& grad, double delta) {
  return cosine_abs(w, grad) < delta / std::sqrt(static_cast<double>(w.size()));
}

/// Heavy-ball momentum (Nesterov when hp.nesterov). Weight decay, if set, is
/// applied decoupled.
inline StepReport momentum_step(Vec& w, const Vec& grad, OptState& state, const HyperParams& hp,
                                std::span<const IndexRange> slices = {}) {
  detail::check_shapes("momentum_step", w, grad, &state);
  const auto ranges = slices.empty() ? detail::whole(w) : std::vector<IndexRange>(slices.begin(), slices.end());
  std::vector<double> dir = detail::momentum_direction(grad, state, hp);
  auto obs = detail::observe_slices(w, grad, ranges, hp.delta);
  return detail::apply_update(w, dir, dir, std::move(obs), hp.lr, hp.weight_decay);
}

/// Momentum with the thresholded tangent projection per scope slice.
inline StepReport sgdp_step(Vec& w, const Vec& grad, OptState& state, const HyperParams& hp,
                            std::span<const IndexRange> slices = {}) {
  detail::check_shapes("sgdp_step", w, grad, &state);
  const auto ranges = slices.empty() ? detail::whole(w) : std::vector<IndexRange>(slices.begin(), slices.end());
  std::vector<double> raw = detail::momentum_direction(grad, state, hp);
  std::vector<double> applied = raw;
  auto reps = detail::project_slices(w, grad, applied, ranges, hp.delta, true);
  return detail::apply_update(w, raw, applied, std::move(reps), hp.lr, hp.weight_decay);
}

/// Adam without decay. Bias correction only when hp.bias_correction.
inline StepReport adam_step(Vec& w, const Vec& grad, OptState& state, const HyperParams& hp,
                            std::span<const IndexRange> slices = {}) {
  detail::check_shapes("adam_step", w, grad, &state);
  const auto ranges = slices.empty() ? detail::whole(w) : std::vector<IndexRange>(slices.begin(), slices.end());
  std::vector<double> dir = detail::adam_direction(grad, state, hp);
  auto obs = detail::observe_slices(w, grad, ranges, hp.delta);
  return detail::apply_update(w, dir, dir, std::move(obs), hp.lr, 0.0);
}

/// Adam with decoupled weight decay.
inline StepReport adamw_step(Vec& w, const Vec& grad, OptState& state, const HyperParams& hp,
                             std::span<const IndexRange> slices = {}) {
  detail::check_shapes("adamw_step", w, grad, &state);
  const auto ranges = slices.empty() ? detail::whole(w) : std::vector<IndexRange>(slices.begin(), slices.end());
  std::vector<double> dir = detail::adam_direction(grad, state, hp);
  auto obs = detail::observe_slices(w, grad, ranges, hp.delta);
  return detail::apply_update(w, dir, dir, std::move(obs), hp.lr, hp.weight_decay);
}

inline StepReport adamp_step(Vec& w, const Vec& grad, OptState& state, const HyperParams& hp,
                             std::span<const IndexRange> slices = {}) {
  detail::check_shapes("adamp_step", w, grad, &state);
  const auto ranges = slices.empty() ? detail::whole(w) : std::vector<IndexRange>(slices.begin(), slices.end());
  std::vector<double> raw = detail::adam_direction(grad, state, hp);
  std::vector<double> applied = raw;
  auto reps = detail::project_slices(w, grad, applied, ranges, hp.delta, true);
  return detail::apply_update(w, raw, applied, std::move(reps), hp.lr, hp.weight_decay);
}

// ---------------------------------------------------------------------------
// Name-based dispatch for the harness.

enum class OptimizerKind { GD, Momentum, Adam, AdamW, SGDP, AdamP };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::GD: return "gd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::SGDP: return "sgdp";
    case OptimizerKind::AdamP: return "adamp";
  }
  return "?";
}

inline std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::GD, OptimizerKind::Momentum, OptimizerKind::Adam, OptimizerKind::AdamW,
                 OptimizerKind::SGDP, OptimizerKind::AdamP}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

inline bool is_projected(OptimizerKind k) { return k == OptimizerKind::SGDP || k == OptimizerKind::AdamP; }

inline bool is_sgd_family(OptimizerKind k) {
  return k == OptimizerKind::GD || k == OptimizerKind::Momentum || k == OptimizerKind::SGDP;
}

/// One step of `kind` on a block. GD ignores the state buffers and reports
/// the gradient as both raw and applied update.
inline StepReport step(OptimizerKind kind, Vec& w, const Vec& grad, OptState& state, const HyperParams& hp,
                       std::span<const IndexRange> slices = {}) {
  switch (kind) {
    case OptimizerKind::GD: {
      detail::check_shapes("gd_step", w, grad, nullptr);
      const auto ranges =
          slices.empty() ? detail::whole(w) : std::vector<IndexRange>(slices.begin(), slices.end());
      auto obs = detail::observe_slices(w, grad, ranges, hp.delta);
      ++state.t;
      return detail::apply_update(w, grad.values(), grad.values(), std::move(obs), hp.lr, 0.0);
    }
    case OptimizerKind::Momentum: return momentum_step(w, grad, state, hp, slices);
    case OptimizerKind::Adam: return adam_step(w, grad, state, hp, slices);
    case OptimizerKind::AdamW: return adamw_step(w, grad, state, hp, slices);
    case OptimizerKind::SGDP: return sgdp_step(w, grad, state, hp, slices);
    case OptimizerKind::AdamP: return adamp_step(w, grad, state, hp, slices);
  }
  throw DomainError("unknown optimizer kind");
}

}  // namespace siproj
