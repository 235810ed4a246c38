#pragma once

// Deterministic planning clock. Work is charged in modeled seconds per
// primitive operation so that budgets and timeouts do not depend on the
// machine; wall time is measured separately for reporting.

#include <limits>

namespace bsr {

struct EffortCosts {
  double expansion = 1e-3;        // search node expansion incl. heuristic
  double grounded_action = 2e-5;  // one ground action compiled
  double instance = 2e-5;         // one optimistic stream instance
  double stream_call = 1e-3;      // fixed overhead of a stream evaluation
  double motion_step = 2e-3;      // one interpolated configuration checked
  double ik = 5e-3;               // one inverse-kinematics query
  double placement = 1e-3;        // one placement attempt
  double visibility = 1e-6;       // one ray-box occlusion test
  double particle = 1e-5;         // one particle touched by a belief update
};

class EffortClock {
 public:
  explicit EffortClock(EffortCosts costs = {}) : costs_(costs) {}
  void charge(double seconds) { seconds_ += seconds; }
  double now() const { return seconds_; }
  const EffortCosts& costs() const { return costs_; }

 private:
  EffortCosts costs_;
  double seconds_ = 0.0;
};

inline constexpr double kNoDeadline = std::numeric_limits<double>::infinity();

}  // namespace bsr
