#pragma once

// Scale-invariant test objectives with analytic gradients, and a central
// finite-difference oracle to check them against.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "siproj/core.hpp"

namespace siproj {

struct Evaluation {
  double value = 0.0;
  std::vector<Vec> grads;
};

struct ValueGrad {
  double value = 0.0;
  Vec grad;
};

/// Value-and-gradient provider over a list of parameter blocks.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Evaluation evaluate(std::span<const ParamBlock> params) const = 0;

  /// One flag per block: true when the objective is invariant to rescaling
  /// that block (or each of its channels).
  virtual std::vector<bool> invariance() const = 0;

  double value(std::span<const ParamBlock> params) const { return evaluate(params).value; }
};

/// Adapts a single-block value/gradient function to the Objective interface.
class SingleBlockObjective final : public Objective {
 public:
  using Fn = std::function<ValueGrad(const Vec&)>;

  SingleBlockObjective(Fn fn, bool invariant) : fn_(std::move(fn)), invariant_(invariant) {}

  Evaluation evaluate(std::span<const ParamBlock> params) const override {
    if (params.size() != 1) throw ShapeMismatch("SingleBlockObjective", params.size(), 1);
    ValueGrad vg = fn_(params[0].values());
    require_same_size("SingleBlockObjective", vg.grad.size(), params[0].size());
    return {vg.value, {std::move(vg.grad)}};
  }

  std::vector<bool> invariance() const override { return {invariant_}; }

 private:
  Fn fn_;
  bool invariant_;
};

// ---------------------------------------------------------------------------
// Normalization

/// (x - mean) / sqrt(var + eps) with population variance. eps = 0 gives the
/// exactly scale-invariant operator; a positive eps mimics the stabilizer
/// used by batch-normalization layers.
inline Vec normalize(const Vec& x, double eps) {
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("normalize: need at least two entries");
  double mean = 0.0;
  for (double v : x.values()) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (var == 0.0) throw DegenerateStd("normalize");
  const double sigma = std::sqrt(var + eps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) / sigma;
  return Vec(std::move(out));
}

inline Vec norm_op(const Vec& x) { return normalize(x, 0.0); }

// ---------------------------------------------------------------------------
// 2D cosine toy

/// Signed cosine between 2D vectors w and w_star, with its gradient in w.
/// The gradient is sin(angle) / |w| along the tangent (-w_y, w_x) / |w|,
/// with the sine taken from the 2D cross product so it stays accurate near
/// the optimum.
inline ValueGrad cosine_toy_2d(const Vec& w, const Vec& w_star) {
  if (w.size() != 2) throw ShapeMismatch("cosine_toy_2d (w)", w.size(), 2);
  if (w_star.size() != 2) throw ShapeMismatch("cosine_toy_2d (w_star)", w_star.size(), 2);
  const double nw = l2_norm(w);
  if (nw == 0.0) throw ZeroNorm("cosine_toy_2d (w)");
  const Vec target = unit(w_star);
  const double wx = w[0] / nw, wy = w[1] / nw;
  const double value = wx * target[0] + wy * target[1];
  const double sine = wx * target[1] - wy * target[0];
  return {value, Vec{-wy * sine / nw, wx * sine / nw}};
}

// ---------------------------------------------------------------------------
// Scale-invariant Rosenbrock

inline constexpr double kRosenbrockAngleScale = 1.5;
inline constexpr double kRosenbrockCurvature = 300.0;

inline double rosenbrock_2d(double a, double b) {
  return (1.0 - a) * (1.0 - a) + kRosenbrockCurvature * (b - a * a) * (b - a * a);
}

/// Rosenbrock evaluated at the scaled angles (c psi, c phi).
inline double rosenbrock_angles(double psi, double phi, double c = kRosenbrockAngleScale) {
  return rosenbrock_2d(c * psi, c * phi);
}

struct SphericalPoint {
  double r = 1.0;
  double psi = 0.0;
  double phi = 0.0;
};

/// Chart on the z > 0 hemisphere:
///   x = r cos(phi) sin(psi),  y = r sin(phi),  z = r cos(phi) cos(psi)
/// so phi = asin(y / r) and psi = atan2(x, z). The two poles (x = z = 0) are
/// accepted with psi pinned to 0.
inline SphericalPoint spherical_from_cartesian(double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (r == 0.0) throw ZeroNorm("spherical_from_cartesian");
  const double rho = std::hypot(x, z);
  const double phi = std::atan2(y, rho);
  if (rho == 0.0) return {r, 0.0, phi};
  if (!(z > 0.0)) throw OutOfDomain("spherical_from_cartesian: point is outside the z > 0 hemisphere");
  return {r, std::atan2(x, z), phi};
}

inline Vec cartesian_from_spherical(const SphericalPoint& s) {
  return Vec{s.r * std::cos(s.phi) * std::sin(s.psi), s.r * std::sin(s.phi),
             s.r * std::cos(s.phi) * std::cos(s.psi)};
}

/// Rosenbrock on the angles of p, independent of |p|. The gradient is the
/// chain rule through the hemisphere chart and is orthogonal to p.
inline ValueGrad rosenbrock_3d(const Vec& p, double c = kRosenbrockAngleScale) {
  if (p.size() != 3) throw ShapeMismatch("rosenbrock_3d", p.size(), 3);
  const double x = p[0], y = p[1], z = p[2];
  const SphericalPoint s = spherical_from_cartesian(x, y, z);
  const double rho_sq = x * x + z * z;
  if (rho_sq == 0.0) throw OutOfDomain("rosenbrock_3d: gradient undefined at the chart pole");
  const double rho = std::sqrt(rho_sq);
  const double r_sq = s.r * s.r;

  const double a = c * s.psi;
  const double b = c * s.phi;
  const double value = rosenbrock_2d(a, b);
  const double df_da = -2.0 * (1.0 - a) - 4.0 * kRosenbrockCurvature * a * (b - a * a);
  const double df_db = 2.0 * kRosenbrockCurvature * (b - a * a);
  const double df_dpsi = c * df_da;
  const double df_dphi = c * df_db;

  // d psi = (z dx - x dz) / rho^2
  // d phi = (-x y dx + rho^2 dy - y z dz) / (r^2 rho)
  const double gx = df_dpsi * z / rho_sq - df_dphi * x * y / (r_sq * rho);
  const double gy = df_dphi * rho / r_sq;
  const double gz = -df_dpsi * x / rho_sq - df_dphi * y * z / (r_sq * rho);
  return {value, Vec{gx, gy, gz}};
}

/// Cartesian point on the sphere of radius r at scaled angles (c psi, c phi).
inline Vec rosenbrock_point(double scaled_psi, double scaled_phi, double r = 1.0,
                            double c = kRosenbrockAngleScale) {
  return cartesian_from_spherical({r, scaled_psi / c, scaled_phi / c});
}

// ---------------------------------------------------------------------------
// Tiny normalized network

struct TinyNetConfig {
  std::size_t hidden = 8;
  std::size_t samples = 64;
  std::uint64_t data_seed = 7;
  double norm_eps = 0.0;
  double blob_separation = 3.0;
};

/// Two-layer classifier on two 2D Gaussian blobs:
///   a_j = X w_j, z_j = normalize(a_j) over the batch, h = tanh(z),
///   logits = V h + b, mean softmax cross-entropy.
/// Block 0 ("hidden", H x 2, one channel per unit) is scale-invariant;
/// block 1 ("output", V then b) is not.
class TinyNormNet final : public Objective {
 public:
  static constexpr std::size_t kInputDim = 2;
  static constexpr std::size_t kClasses = 2;

  explicit TinyNormNet(TinyNetConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.hidden < 2) throw DomainError("TinyNormNet: hidden width must be at least 2");
    if (cfg_.samples < 2) throw DomainError("TinyNormNet: batch size must be at least 2");
    Rng rng(cfg_.data_seed);
    inputs_.resize(cfg_.samples * kInputDim);
    labels_.resize(cfg_.samples);
    for (std::size_t i = 0; i < cfg_.samples; ++i) {
      const std::size_t label = i % kClasses;
      const double sign = label == 0 ? -1.0 : 1.0;
      labels_[i] = label;
      inputs_[i * kInputDim + 0] = sign * cfg_.blob_separation + rng.normal();
      inputs_[i * kInputDim + 1] = 0.5 * sign * cfg_.blob_separation + rng.normal();
    }
  }

  [[nodiscard]] const TinyNetConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::size_t hidden_size() const noexcept { return cfg_.hidden * kInputDim; }
  [[nodiscard]] std::size_t output_size() const noexcept { return kClasses * cfg_.hidden + kClasses; }

  std::vector<ParamBlock> initial_params(Rng& rng) const {
    std::vector<double> hidden(hidden_size());
    for (double& x : hidden) x = rng.normal();
    std::vector<double> output(output_size(), 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
    for (std::size_t i = 0; i < kClasses * cfg_.hidden; ++i) output[i] = scale * rng.normal();
    return {ParamBlock("hidden", Vec(std::move(hidden)), PerChannel::uniform(cfg_.hidden, kInputDim)),
            ParamBlock("output", Vec(std::move(output)))};
  }

  std::vector<bool> invariance() const override { return {true, false}; }

  Evaluation evaluate(std::span<const ParamBlock> params) const override {
    if (params.size() != 2) throw ShapeMismatch("TinyNormNet", params.size(), 2);
    require_same_size("TinyNormNet hidden", params[0].size(), hidden_size());
    require_same_size("TinyNormNet output", params[1].size(), output_size());
    const auto& w = params[0].values();
    const auto& o = params[1].values();
    const std::size_t n = cfg_.samples;
    const std::size_t hdim = cfg_.hidden;
    const auto nd = static_cast<double>(n);

    // Forward. z and h stored unit-major: [j * n + i].
    std::vector<double> z(hdim * n), h(hdim * n);
    std::vector<double> sigma(hdim);
    for (std::size_t j = 0; j < hdim; ++j) {
      std::vector<double> pre(n);
      for (std::size_t i = 0; i < n; ++i) {
        pre[i] = w[j * kInputDim] * inputs_[i * kInputDim] + w[j * kInputDim + 1] * inputs_[i * kInputDim + 1];
      }
      double mean = 0.0;
      for (double a : pre) mean += a;
      mean /= nd;
      double var = 0.0;
      for (double a : pre) var += (a - mean) * (a - mean);
      var /= nd;
      if (var == 0.0) throw DegenerateStd("TinyNormNet hidden unit " + std::to_string(j));
      sigma[j] = std::sqrt(var + cfg_.norm_eps);
      for (std::size_t i = 0; i < n; ++i) {
        z[j * n + i] = (pre[i] - mean) / sigma[j];
        h[j * n + i] = std::tanh(z[j * n + i]);
      }
    }

    double loss = 0.0;
    std::vector<double> dlogits(n * kClasses);
    for (std::size_t i = 0; i < n; ++i) {
      double logits[kClasses];
      for (std::size_t k = 0; k < kClasses; ++k) {
        double s = o[kClasses * hdim + k];
        for (std::size_t j = 0; j < hdim; ++j) s += o[k * hdim + j] * h[j * n + i];
        logits[k] = s;
      }
      const double peak = std::max(logits[0], logits[1]);
      double denom = 0.0;
      for (double l : logits) denom += std::exp(l - peak);
      const double log_denom = peak + std::log(denom);
      loss -= logits[labels_[i]] - log_denom;
      for (std::size_t k = 0; k < kClasses; ++k) {
        const double prob = std::exp(logits[k] - log_denom);
        dlogits[i * kClasses + k] = (prob - (k == labels_[i] ? 1.0 : 0.0)) / nd;
      }
    }
    loss /= nd;

    // Backward.
    std::vector<double> g_out(output_size(), 0.0);
    std::vector<double> g_hidden(hidden_size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < kClasses; ++k) {
        const double d = dlogits[i * kClasses + k];
        g_out[kClasses * hdim + k] += d;
        for (std::size_t j = 0; j < hdim; ++j) g_out[k * hdim + j] += d * h[j * n + i];
      }
    }
    for (std::size_t j = 0; j < hdim; ++j) {
      std::vector<double> dz(n);
      double mean_dz = 0.0, mean_dz_z = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double dh = 0.0;
        for (std::size_t k = 0; k < kClasses; ++k) dh += dlogits[i * kClasses + k] * o[k * hdim + j];
        const double hv = h[j * n + i];
        dz[i] = dh * (1.0 - hv * hv);
        mean_dz += dz[i];
        mean_dz_z += dz[i] * z[j * n + i];
      }
      mean_dz /= nd;
      mean_dz_z /= nd;
      for (std::size_t i = 0; i < n; ++i) {
        const double da = (dz[i] - mean_dz - z[j * n + i] * mean_dz_z) / sigma[j];
        g_hidden[j * kInputDim] += da * inputs_[i * kInputDim];
        g_hidden[j * kInputDim + 1] += da * inputs_[i * kInputDim + 1];
      }
    }
    return {loss, {Vec(std::move(g_hidden)), Vec(std::move(g_out))}};
  }

 private:
  TinyNetConfig cfg_;
  std::vector<double> inputs_;
  std::vector<std::size_t> labels_;
};

/// Evaluates the objective on tiny_norm_net-style block lists without
/// building an Objective first.
inline Evaluation tiny_norm_net(const TinyNormNet& net, std::span<const ParamBlock> params) {
  return net.evaluate(params);
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate of every block.
inline std::vector<Vec> finite_diff_grad(const Objective& obj, std::span<const ParamBlock> params, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: step must be positive");
  std::vector<ParamBlock> work(params.begin(), params.end());
  std::vector<Vec> out;
  out.reserve(params.size());
  for (std::size_t b = 0; b < work.size(); ++b) {
    const Vec base = work[b].values();
    std::vector<double> grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<double> shifted = base.values();
      shifted[i] = base[i] + h;
      work[b].set_values(Vec(shifted));
      const double plus = obj.value(work);
      shifted[i] = base[i] - h;
      work[b].set_values(Vec(shifted));
      const double minus = obj.value(work);
      grad[i] = (plus - minus) / (2.0 * h);
    }
    work[b].set_values(base);
    out.emplace_back(std::move(grad));
  }
  return out;
}

}  // namespace siproj
