#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "realmlp/types.hpp"

namespace realmlp {

/// Multi-cycle schedule with k valleys on [0, 1]:
/// 0.5 (1 - cos(2 pi log2(1 + (2^k - 1) t))), zero at t = (2^m - 1)/(2^k - 1).
inline double coslog(int k, double t) {
  const double span = std::pow(2.0, k) - 1.0;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                               std::log2(1.0 + span * t)));
}

/// Flat at 1 on [0, 1/2], cosine decay to 0 at t = 1.
inline double flat_cos(double t) {
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (std::max(1.0, 2.0 * t) - 1.0)));
}

/// Single half-cosine decay from 1 to 0.
inline double cosine_decay(double t) {
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

enum class ScheduleKind { constant, coslog4, flat_cos, cosine_decay };

inline double schedule_value(ScheduleKind kind, double t) {
  switch (kind) {
    case ScheduleKind::constant: return 1.0;
    case ScheduleKind::coslog4: return coslog(4, t);
    case ScheduleKind::flat_cos: return flat_cos(t);
    case ScheduleKind::cosine_decay: return cosine_decay(t);
  }
  return 1.0;
}

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::coslog4: return "coslog4";
    case ScheduleKind::flat_cos: return "flat_cos";
    case ScheduleKind::cosine_decay: return "cosine_decay";
  }
  return "constant";
}

inline ScheduleKind schedule_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "coslog4") return ScheduleKind::coslog4;
  if (s == "flat_cos") return ScheduleKind::flat_cos;
  if (s == "cosine_decay") return ScheduleKind::cosine_decay;
  throw ContractError("unknown schedule: " + s);
}

/// base_value * param_factor * schedule(iteration / total_iterations),
/// with 0-based iterations.
inline double scheduled_value(double base, double factor, ScheduleKind kind,
                              long iteration, long total_iterations) {
  const double t = total_iterations > 0
                       ? static_cast<double>(iteration) /
                             static_cast<double>(total_iterations)
                       : 0.0;
  return base * factor * schedule_value(kind, t);
}

}  // namespace realmlp
