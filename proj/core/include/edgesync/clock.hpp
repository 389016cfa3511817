#pragma once

#include <chrono>

namespace edgesync {

/// Seconds since an arbitrary origin.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

/// Manually advanced clock for simulation and deterministic tests.
class SimClock final : public Clock {
 public:
  explicit SimClock(double start = 0.0) : now_(start) {}

  double now() const override { return now_; }
  void advance(double seconds) { now_ += seconds; }
  void set(double t) { now_ = t; }

 private:
  double now_;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

  double now() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace edgesync
