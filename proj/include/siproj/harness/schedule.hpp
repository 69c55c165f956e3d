#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "siproj/harness/config.hpp"

namespace siproj::harness {

/// Learning rate at step t of T: constant, linear decay to zero, or a
/// half-cosine to zero.
inline double lr_schedule(ScheduleKind kind, double lr0, std::size_t t, std::size_t total) {
  if (total == 0 || t > total) throw DomainError("lr_schedule: need 0 <= t <= T with T >= 1");
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  switch (kind) {
    case ScheduleKind::Constant: return lr0;
    case ScheduleKind::LinearDecay: return lr0 * (1.0 - frac);
    case ScheduleKind::Cosine: return lr0 * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
  }
  throw DomainError("lr_schedule: unknown schedule");
}

}  // namespace siproj::harness
