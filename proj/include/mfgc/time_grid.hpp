#pragma once

#include <stdexcept>

namespace mfgc {

// Uniform grid t_m = m*T/M on [0, T].
struct TimeGrid {
  double horizon = 1.0;
  int steps = 2;

  TimeGrid() = default;
  TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
    if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be > 0");
    if (steps < 2) throw std::invalid_argument("TimeGrid: need at least 2 steps");
  }

  int nodes() const { return steps + 1; }
  double dt() const { return horizon / steps; }
  double t(int m) const { return m == steps ? horizon : m * dt(); }

  TimeGrid refined(int factor) const { return TimeGrid(horizon, steps * factor); }

  bool operator==(const TimeGrid& o) const {
    return horizon == o.horizon && steps == o.steps;
  }
};

}  // namespace mfgc
