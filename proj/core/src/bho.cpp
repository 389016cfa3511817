#include "edgesync/bho.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "edgesync/error.hpp"

namespace edgesync::bho {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return sq;
}

Point uniform_point(std::mt19937_64& rng, std::size_t dims) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Point p(dims);
  for (double& v : p) v = unit(rng);
  return p;
}

}  // namespace

GaussianProcess::GaussianProcess(std::vector<Observation> observations, Kernel kernel,
                                 double mean_constant)
    : observations_(std::move(observations)), kernel_(kernel), mean_constant_(mean_constant) {
  if (observations_.empty()) throw Error(Errc::EmptyList, "GP needs at least one observation");
  if (!(kernel_.lengthscale > 0.0) || !(kernel_.variance > 0.0) ||
      !(kernel_.noise_variance >= 0.0)) {
    throw Error(Errc::InvalidArgument, "invalid GP kernel parameters");
  }
  const auto n = static_cast<Eigen::Index>(observations_.size());
  const std::size_t dim = observations_.front().point.size();
  for (const auto& o : observations_) {
    if (o.point.size() != dim) throw Error(Errc::DimensionMismatch, "GP points differ in size");
    if (!std::isfinite(o.value)) throw Error(Errc::NonFinite, "GP observation value");
  }

  RowMatrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = covariance(observations_[i].point, observations_[j].point);
    }
  }
  Eigen::VectorXd resid(n);
  for (Eigen::Index i = 0; i < n; ++i) resid(i) = observations_[i].value - mean_constant_;

  // Escalating jitter for near-duplicate points.
  const double base_jitter = kernel_.noise_variance > 0.0 ? 0.0 : 1e-12 * kernel_.variance;
  for (double extra = base_jitter; extra <= 1e-3 * kernel_.variance;
       extra = extra > 0.0 ? extra * 10.0 : 1e-12 * kernel_.variance) {
    RowMatrix a = k;
    a.diagonal().array() += kernel_.noise_variance + extra;
    Eigen::LLT<RowMatrix> llt(a);
    if (llt.info() == Eigen::Success) {
      jitter_ = extra;
      RowMatrix lower = llt.matrixL();
      chol_.assign(lower.data(), lower.data() + lower.size());
      Eigen::VectorXd alpha = llt.solve(resid);
      alpha_.assign(alpha.data(), alpha.data() + alpha.size());
      return;
    }
  }
  throw Error(Errc::SingularKernel, "kernel matrix not positive definite even with jitter");
}

double GaussianProcess::covariance(std::span<const double> a, std::span<const double> b) const {
  return kernel_.variance *
         std::exp(-squared_distance(a, b) / (2.0 * kernel_.lengthscale * kernel_.lengthscale));
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> query) const {
  const auto n = static_cast<Eigen::Index>(observations_.size());
  if (query.size() != observations_.front().point.size()) {
    throw Error(Errc::DimensionMismatch, "query dimension differs from observations");
  }
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks(i) = covariance(query, observations_[i].point);
  Eigen::Map<const Eigen::VectorXd> alpha(alpha_.data(), n);
  Eigen::Map<const RowMatrix> lower(chol_.data(), n, n);

  Prediction p;
  p.mean = mean_constant_ + ks.dot(alpha);
  const Eigen::VectorXd v = lower.triangularView<Eigen::Lower>().solve(ks);
  p.variance = std::max(0.0, kernel_.variance - v.squaredNorm());
  return p;
}

GaussianProcess::Prediction gp_fit_predict(const std::vector<Observation>& observations,
                                           const GaussianProcess::Kernel& kernel,
                                           double mean_constant, std::span<const double> query) {
  return GaussianProcess(observations, kernel, mean_constant).predict(query);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double variance, double best_so_far) {
  const double gap = mean - best_so_far;
  if (!(variance > 0.0)) return std::max(gap, 0.0);
  const double sigma = std::sqrt(variance);
  const double z = gap / sigma;
  return std::max(0.0, gap * normal_cdf(z) + sigma * normal_pdf(z));
}

SearchSpace::SearchSpace()
    : SearchSpace(Dimension{1e-4, 1e-1, true}, Dimension{0.0, 0.99, false},
                  Dimension{1e-6, 1e-2, true}) {}

SearchSpace::SearchSpace(Dimension learning_rate, Dimension momentum, Dimension weight_decay)
    : dims_{learning_rate, momentum, weight_decay} {
  for (const auto& d : dims_) {
    if (!(d.lo < d.hi)) throw Error(Errc::InvalidArgument, "search bound lo must be < hi");
    if (d.log_scale && !(d.lo > 0.0)) {
      throw Error(Errc::InvalidArgument, "log-scale bounds must be positive");
    }
  }
  if (!(dims_[0].lo > 0.0)) throw Error(Errc::InvalidArgument, "learning rate must stay > 0");
  if (dims_[1].lo < 0.0 || dims_[1].hi >= 1.0) {
    throw Error(Errc::InvalidArgument, "momentum bounds must lie in [0,1)");
  }
  if (dims_[2].lo < 0.0) throw Error(Errc::InvalidArgument, "weight decay must stay >= 0");
}

Point SearchSpace::normalize(const HyperParams& h) const {
  const std::array<double, 3> raw{h.learning_rate(), h.momentum(), h.weight_decay()};
  Point p(3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = dims_[i];
    if (d.log_scale) {
      const double v = std::max(raw[i], d.lo * 1e-6);
      p[i] = (std::log(v) - std::log(d.lo)) / (std::log(d.hi) - std::log(d.lo));
    } else {
      p[i] = (raw[i] - d.lo) / (d.hi - d.lo);
    }
  }
  return p;
}

HyperParams SearchSpace::denormalize(std::span<const double> point) const {
  if (point.size() != 3) throw Error(Errc::DimensionMismatch, "hyperparameter point must be 3-D");
  std::array<double, 3> raw{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = dims_[i];
    const double u = std::clamp(point[i], 0.0, 1.0);
    raw[i] = d.log_scale ? std::exp(std::log(d.lo) + u * (std::log(d.hi) - std::log(d.lo)))
                         : d.lo + u * (d.hi - d.lo);
  }
  return HyperParams(raw[0], raw[1], raw[2]);
}

void BhoConfig::validate() const {
  if (max_evaluations < 1) throw Error(Errc::InvalidArgument, "max_evaluations must be >= 1");
  if (init_random_points < 1) throw Error(Errc::InvalidArgument, "init_random_points must be >= 1");
  if (init_random_points > max_evaluations) {
    throw Error(Errc::InvalidArgument, "init_random_points cannot exceed max_evaluations");
  }
  if (ei_candidates < 1) throw Error(Errc::InvalidArgument, "ei_candidates must be >= 1");
  if (dimensions == 0) throw Error(Errc::InvalidArgument, "dimensions must be >= 1");
}

BhoResult bho_optimize(const Objective& objective, const BhoConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  BhoResult result;

  auto evaluate = [&](Point point, double acquisition) {
    TraceEntry entry{std::move(point), 0.0, false, acquisition};
    try {
      entry.value = objective(entry.point);
      if (!std::isfinite(entry.value)) throw Error(Errc::NonFinite, "objective value");
    } catch (const std::exception&) {
      entry.failed = true;
    }
    result.trace.push_back(std::move(entry));
  };

  // Failed evaluations take the worst value seen so far.
  auto observations = [&] {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& e : result.trace) {
      if (!e.failed) worst = std::min(worst, e.value);
    }
    std::vector<Observation> obs;
    if (!std::isfinite(worst)) return obs;
    for (auto& e : result.trace) {
      if (e.failed) e.value = worst;
      obs.push_back(Observation{e.point, e.value});
    }
    return obs;
  };

  for (int i = 0; i < cfg.init_random_points; ++i) evaluate(uniform_point(rng, cfg.dimensions), 0.0);

  for (int i = cfg.init_random_points; i < cfg.max_evaluations; ++i) {
    auto obs = observations();
    if (obs.empty()) {
      evaluate(uniform_point(rng, cfg.dimensions), 0.0);
      continue;
    }
    // Standardize targets so the fixed unit-variance kernel matches their scale.
    double mean = 0.0;
    for (const auto& o : obs) mean += o.value;
    mean /= static_cast<double>(obs.size());
    double var = 0.0;
    for (const auto& o : obs) var += (o.value - mean) * (o.value - mean);
    const double scale = var > 0.0 ? std::sqrt(var / static_cast<double>(obs.size())) : 1.0;
    double best = -std::numeric_limits<double>::infinity();
    for (auto& o : obs) {
      o.value = (o.value - mean) / scale;
      best = std::max(best, o.value);
    }
    const GaussianProcess gp(std::move(obs), cfg.kernel, 0.0);

    Point chosen;
    double chosen_ei = -1.0;
    for (int c = 0; c < cfg.ei_candidates; ++c) {
      Point candidate = uniform_point(rng, cfg.dimensions);
      const auto pred = gp.predict(candidate);
      const double ei = expected_improvement(pred.mean, pred.variance, best);
      if (ei > chosen_ei) {
        chosen_ei = ei;
        chosen = std::move(candidate);
      }
    }
    evaluate(std::move(chosen), chosen_ei * scale);
  }

  observations();
  const TraceEntry* best = nullptr;
  for (const auto& e : result.trace) {
    if (e.failed) continue;
    if (best == nullptr || e.value > best->value) best = &e;
  }
  if (best == nullptr) throw Error(Errc::ObjectiveFailure, "every objective evaluation failed");
  result.best_point = best->point;
  result.best_value = best->value;
  return result;
}

HyperParams aggregate_h0(std::span<const Point> per_workload_best, const SearchSpace& space,
                         bool raw_mean) {
  if (per_workload_best.empty()) throw Error(Errc::EmptyList, "no per-workload optima");
  if (!raw_mean) {
    Point mean(3, 0.0);
    for (const auto& p : per_workload_best) {
      if (p.size() != 3) throw Error(Errc::DimensionMismatch, "hyperparameter point must be 3-D");
      for (std::size_t i = 0; i < 3; ++i) mean[i] += p[i];
    }
    for (double& v : mean) v /= static_cast<double>(per_workload_best.size());
    return space.denormalize(mean);
  }
  std::array<double, 3> sum{};
  for (const auto& p : per_workload_best) {
    const auto h = space.denormalize(p);
    sum[0] += h.learning_rate();
    sum[1] += h.momentum();
    sum[2] += h.weight_decay();
  }
  const auto n = static_cast<double>(per_workload_best.size());
  return HyperParams(sum[0] / n, sum[1] / n, sum[2] / n);
}

void RefineConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be > 0");
  if (consecutive_n < 1) throw Error(Errc::InvalidArgument, "consecutive_n must be >= 1");
  if (segment_length == 0) throw Error(Errc::InvalidArgument, "segment_length must be > 0");
  if (!(step_scale > 0.0)) throw Error(Errc::InvalidArgument, "step_scale must be > 0");
  if (max_iterations < 1) throw Error(Errc::InvalidArgument, "max_iterations must be >= 1");
}

RefineResult refine_minibatch(const HyperParams& h,
                              std::span<const std::vector<LabeledSample>> workloads,
                              const RefineConfig& cfg, const SearchSpace& space,
                              const SegmentEvaluator& evaluate) {
  cfg.validate();
  if (workloads.empty()) throw Error(Errc::EmptyList, "refinement needs at least one workload");
  for (const auto& w : workloads) {
    if (w.empty()) throw Error(Errc::EmptyList, "refinement workload has no samples");
  }

  std::mt19937_64 rng(cfg.seed);
  Point current = space.normalize(h);
  for (double& v : current) v = std::clamp(v, 0.0, 1.0);
  HyperParams current_h = h;
  double best_seen = -std::numeric_limits<double>::infinity();
  int stalls = 0;
  RefineResult result{h, {}};

  for (int iter = 0; iter < cfg.max_iterations && stalls < cfg.consecutive_n; ++iter) {
    RefineStep step;
    step.workload = std::uniform_int_distribution<std::size_t>(0, workloads.size() - 1)(rng);
    const auto& data = workloads[step.workload];
    const std::size_t len = std::min(cfg.segment_length, data.size());
    step.segment_start =
        std::uniform_int_distribution<std::size_t>(0, data.size() - len)(rng);
    const std::span<const LabeledSample> segment(data.data() + step.segment_start, len);

    step.base_accuracy = evaluate(current_h, segment);
    double accuracy = step.base_accuracy;
    for (std::size_t dim = 0; dim < current.size(); ++dim) {
      Point best_move;
      double best_move_acc = accuracy;
      for (double sign : {+1.0, -1.0}) {
        Point trial = current;
        trial[dim] = std::clamp(trial[dim] + sign * cfg.step_scale, 0.0, 1.0);
        if (trial[dim] == current[dim]) continue;
        const double acc = evaluate(space.denormalize(trial), segment);
        if (acc > best_move_acc) {
          best_move_acc = acc;
          best_move = std::move(trial);
        }
      }
      if (!best_move.empty()) {
        current = std::move(best_move);
        current_h = space.denormalize(current);
        accuracy = best_move_acc;
        step.accepted = true;
      }
    }
    step.accepted_accuracy = accuracy;
    best_seen = std::max(best_seen, accuracy);
    step.best_seen = best_seen;
    step.point = current;
    stalls = (accuracy - step.base_accuracy < cfg.epsilon) ? stalls + 1 : 0;
    result.steps.push_back(std::move(step));
  }
  result.hyperparams = current_h;
  return result;
}

}  // namespace edgesync::bho
