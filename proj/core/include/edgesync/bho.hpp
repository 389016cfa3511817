#pragma once

// Offline hyperparameter profiling: a Gaussian-process surrogate with an
// Expected Improvement acquisition, per-workload optimisation, aggregation of
// the per-workload optima into one baseline, and a greedy mini-batch
// refinement pass on top of it.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "edgesync/types.hpp"

namespace edgesync::bho {

using Point = std::vector<double>;

struct Observation {
  Point point;
  double value = 0.0;
};

/// Squared-exponential GP, k(a,b) = variance * exp(-|a-b|^2 / (2 l^2)),
/// with noise_variance on the diagonal and a constant prior mean.
class GaussianProcess {
 public:
  struct Kernel {
    double lengthscale = 0.2;
    double variance = 1.0;
    double noise_variance = 1e-4;
  };

  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  GaussianProcess(std::vector<Observation> observations, Kernel kernel, double mean_constant);

  /// Posterior mean and (non-negative) variance of the latent function.
  Prediction predict(std::span<const double> query) const;

  const std::vector<Observation>& observations() const noexcept { return observations_; }
  const Kernel& kernel() const noexcept { return kernel_; }
  double mean_constant() const noexcept { return mean_constant_; }
  /// Diagonal jitter that had to be added on top of noise_variance.
  double jitter() const noexcept { return jitter_; }

  double covariance(std::span<const double> a, std::span<const double> b) const;

 private:
  std::vector<Observation> observations_;
  Kernel kernel_;
  double mean_constant_;
  double jitter_ = 0.0;
  std::vector<double> alpha_;       // (K + s^2 I)^-1 (y - m)
  std::vector<double> chol_;        // lower Cholesky factor, row-major n x n
};

/// Fits and predicts in one step. Throws EmptyList with no observations and
/// SingularKernel if jitter cannot rescue the factorisation.
GaussianProcess::Prediction gp_fit_predict(const std::vector<Observation>& observations,
                                           const GaussianProcess::Kernel& kernel,
                                           double mean_constant, std::span<const double> query);

/// Closed-form EI for maximisation. EI = max(mu - best, 0) when variance = 0.
double expected_improvement(double mean, double variance, double best_so_far);

double normal_pdf(double z);
double normal_cdf(double z);

struct Dimension {
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
};

/// Maps HyperParams (learning rate, momentum, weight decay) to [0,1]^3.
class SearchSpace {
 public:
  SearchSpace();
  SearchSpace(Dimension learning_rate, Dimension momentum, Dimension weight_decay);

  Point normalize(const HyperParams& h) const;
  /// Clamps into [0,1] before mapping back.
  HyperParams denormalize(std::span<const double> point) const;
  const std::array<Dimension, 3>& dims() const noexcept { return dims_; }

 private:
  std::array<Dimension, 3> dims_;
};

struct BhoConfig {
  int max_evaluations = 25;
  int init_random_points = 5;
  int ei_candidates = 2048;
  std::uint64_t seed = 0;
  std::size_t dimensions = 3;
  GaussianProcess::Kernel kernel{};

  void validate() const;
};

struct TraceEntry {
  Point point;
  double value = 0.0;
  bool failed = false;
  /// EI of the chosen candidate (0 for the random initial points).
  double acquisition = 0.0;
};

struct BhoResult {
  Point best_point;
  double best_value = 0.0;
  std::vector<TraceEntry> trace;
};

using Objective = std::function<double(std::span<const double>)>;

/// Random initial design, then GP fit + argmax EI over a seeded candidate
/// pool, up to max_evaluations. A throwing objective is recorded at the worst
/// observed value; if every evaluation fails the call throws ObjectiveFailure.
BhoResult bho_optimize(const Objective& objective, const BhoConfig& cfg);

/// Dimension-wise mean of normalized optima, mapped back through `space`.
/// With raw_mean the mean is taken over the denormalized values instead.
HyperParams aggregate_h0(std::span<const Point> per_workload_best, const SearchSpace& space,
                         bool raw_mean = false);

struct RefineConfig {
  double epsilon = 0.005;
  int consecutive_n = 3;
  std::size_t segment_length = 200;
  double step_scale = 0.1;
  int max_iterations = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Validation accuracy of hyperparameters `h` trained on one contiguous
/// segment of labelled samples.
using SegmentEvaluator =
    std::function<double(const HyperParams& h, std::span<const LabeledSample> segment)>;

struct RefineStep {
  std::size_t workload = 0;
  std::size_t segment_start = 0;
  double base_accuracy = 0.0;
  double accepted_accuracy = 0.0;
  double best_seen = 0.0;
  bool accepted = false;
  Point point;
};

struct RefineResult {
  HyperParams hyperparams;
  std::vector<RefineStep> steps;
};

/// Coordinate-wise greedy refinement: each iteration draws a contiguous
/// segment from a random workload and tries +/- step_scale on every
/// normalized coordinate, keeping a move only if it raises accuracy on that
/// segment. Stops after consecutive_n iterations with improvement < epsilon.
RefineResult refine_minibatch(const HyperParams& h,
                              std::span<const std::vector<LabeledSample>> workloads,
                              const RefineConfig& cfg, const SearchSpace& space,
                              const SegmentEvaluator& evaluate);

}  // namespace edgesync::bho
