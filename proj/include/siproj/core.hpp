#pragma once

// Dense vector primitives, parameter blocks, the deterministic RNG and the
// sphere-geometry helpers shared by every other header.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace siproj {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroNorm : public Error {
 public:
  explicit ZeroNorm(const std::string& where) : Error(where + ": zero-norm vector") {}
};

class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& where) : Error(where + ": non-finite element") {}
};

class ShapeMismatch : public Error {
 public:
  ShapeMismatch(const std::string& where, std::size_t a, std::size_t b)
      : Error(where + ": shape mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")") {}
};

class DegenerateStd : public Error {
 public:
  explicit DegenerateStd(const std::string& where) : Error(where + ": standard deviation is zero") {}
};

class OutOfDomain : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidScope : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Vec

/// Finite real vector. Every constructor rejects NaN and Inf, so anything
/// holding a Vec can assume finite data.
class Vec {
 public:
  Vec() = default;

  explicit Vec(std::vector<double> data) : data_(std::move(data)) { check_finite(); }
  Vec(std::initializer_list<double> data) : data_(data) { check_finite(); }

  static Vec zeros(std::size_t n) { return Vec(std::vector<double>(n, 0.0)); }

  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
  [[nodiscard]] double operator[](std::size_t i) const { return data_[i]; }
  [[nodiscard]] std::span<const double> span() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  [[nodiscard]] Vec slice(std::size_t begin, std::size_t end) const {
    return Vec(std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin),
                                   data_.begin() + static_cast<std::ptrdiff_t>(end)));
  }

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  void check_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) throw NonFinite("Vec");
    }
  }

  std::vector<double> data_;
};

inline void require_same_size(const char* where, std::size_t a, std::size_t b) {
  if (a != b) throw ShapeMismatch(where, a, b);
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Scaled accumulation: avoids overflow/underflow for extreme magnitudes.
inline double norm(std::span<const double> v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

inline double cosine_abs(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroNorm("cosine_abs");
  double c = std::abs(dot(a, b)) / (na * nb);
  return std::clamp(c, 0.0, 1.0);
}

// In-place x <- x - (w_hat . x) w_hat.
inline void project_out(std::span<const double> w, std::span<double> x) {
  const double nw = norm(w);
  if (nw == 0.0) throw ZeroNorm("project_out");
  double coeff = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) coeff += (w[i] / nw) * x[i];
  for (std::size_t i = 0; i < w.size(); ++i) x[i] -= coeff * (w[i] / nw);
}

}  // namespace detail

inline double dot(const Vec& a, const Vec& b) {
  require_same_size("dot", a.size(), b.size());
  return detail::dot(a.span(), b.span());
}

inline double l2_norm(const Vec& v) { return detail::norm(v.span()); }

inline double squared_norm(const Vec& v) { return detail::dot(v.span(), v.span()); }

inline Vec unit(const Vec& v) {
  const double n = l2_norm(v);
  if (n == 0.0) throw ZeroNorm("unit");
  std::vector<double> out(v.values());
  for (double& x : out) x /= n;
  return Vec(std::move(out));
}

/// |a.b| / (|a||b|), clamped to [0, 1].
inline double cosine_abs(const Vec& a, const Vec& b) {
  require_same_size("cosine_abs", a.size(), b.size());
  return detail::cosine_abs(a.span(), b.span());
}

/// Removes the component of x along w: x - (w_hat . x) w_hat.
inline Vec project_out(const Vec& w, const Vec& x) {
  require_same_size("project_out", w.size(), x.size());
  std::vector<double> out(x.values());
  detail::project_out(w.span(), out);
  return Vec(std::move(out));
}

inline Vec operator+(const Vec& a, const Vec& b) {
  require_same_size("operator+", a.size(), b.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Vec(std::move(out));
}

inline Vec operator-(const Vec& a, const Vec& b) {
  require_same_size("operator-", a.size(), b.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return Vec(std::move(out));
}

inline Vec operator*(double c, const Vec& v) {
  std::vector<double> out(v.values());
  for (double& x : out) x *= c;
  return Vec(std::move(out));
}

// ---------------------------------------------------------------------------
// Parameter blocks

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct WholeTensor {
  friend bool operator==(const WholeTensor&, const WholeTensor&) = default;
};

struct PerChannel {
  std::vector<IndexRange> channels;
  friend bool operator==(const PerChannel&, const PerChannel&) = default;

  /// `count` consecutive channels of `width` entries each.
  static PerChannel uniform(std::size_t count, std::size_t width) {
    PerChannel out;
    for (std::size_t c = 0; c < count; ++c) out.channels.push_back({c * width, (c + 1) * width});
    return out;
  }
};

using Scope = std::variant<WholeTensor, PerChannel>;

/// The index ranges a scope induces over a d-dimensional tensor. Throws
/// InvalidScope unless the channels partition [0, d) with every channel
/// holding at least two entries.
inline std::vector<IndexRange> scope_slices(const Scope& scope, std::size_t d) {
  if (std::holds_alternative<WholeTensor>(scope)) return {IndexRange{0, d}};
  std::vector<IndexRange> ranges = std::get<PerChannel>(scope).channels;
  if (ranges.empty()) throw InvalidScope("per-channel scope has no channels");
  std::sort(ranges.begin(), ranges.end(),
            [](const IndexRange& a, const IndexRange& b) { return a.begin < b.begin; });
  std::size_t cursor = 0;
  for (const auto& r : ranges) {
    if (r.begin != cursor) throw InvalidScope("channel ranges must partition [0, d) without gaps or overlap");
    if (r.end < r.begin + 2) throw InvalidScope("every channel needs at least two entries");
    cursor = r.end;
  }
  if (cursor != d) throw InvalidScope("channel ranges do not cover [0, d)");
  return ranges;
}

class ParamBlock {
 public:
  ParamBlock(std::string name, Vec values, Scope scope = WholeTensor{})
      : name_(std::move(name)), values_(std::move(values)), scope_(std::move(scope)) {
    if (values_.empty()) throw InvalidScope("parameter block '" + name_ + "' is empty");
    slices_ = scope_slices(scope_, values_.size());
  }

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const Vec& values() const noexcept { return values_; }
  [[nodiscard]] const Scope& scope() const noexcept { return scope_; }
  [[nodiscard]] const std::vector<IndexRange>& slices() const noexcept { return slices_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  void set_values(Vec v) {
    require_same_size("ParamBlock::set_values", v.size(), values_.size());
    values_ = std::move(v);
  }

  [[nodiscard]] ParamBlock with_values(Vec v) const {
    ParamBlock out = *this;
    out.set_values(std::move(v));
    return out;
  }

 private:
  std::string name_;
  Vec values_;
  Scope scope_;
  std::vector<IndexRange> slices_;
};

// ---------------------------------------------------------------------------
// RNG

/// Seeded generator. Uses mt19937_64 for the bit stream and draws normals
/// with Box-Muller so the sequence does not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vec normal_vec(std::size_t n) {
    std::vector<double> out(n);
    for (double& x : out) x = normal();
    return Vec(std::move(out));
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace siproj
