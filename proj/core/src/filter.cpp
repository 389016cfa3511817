#include "edgesync/filter.hpp"

#include <algorithm>
#include <cmath>

#include "edgesync/error.hpp"

namespace edgesync {

double adaptability_score(const InferenceOutput& output) {
  double entropy = 0.0;
  for (double p : output.probs()) {
    if (p > 0.0) entropy -= p * std::log(p);
  }
  // Rounding can leave a hair below zero for one-hot inputs.
  return std::max(entropy, 0.0);
}

double timeliness_score(double age_seconds, double window_seconds,
                        TimelinessDirection direction) {
  if (!(window_seconds > 0.0)) throw Error(Errc::NonPositiveWindow, "window must be > 0");
  const double x = age_seconds / window_seconds;
  return direction == TimelinessDirection::FavorRecent ? 1.0 / (1.0 + std::exp(x))
                                                       : 1.0 / (1.0 + std::exp(-x));
}

std::size_t keep_count(double keep_fraction, std::size_t n) {
  if (n == 0) return 0;
  const double x = keep_fraction * static_cast<double>(n);
  const double nearest = std::round(x);
  double k = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  k = std::clamp(k, 1.0, static_cast<double>(n));
  return static_cast<std::size_t>(k);
}

FilterCache::FilterCache(EdgeId edge_id, double window_start)
    : edge_id_(std::move(edge_id)), window_start_(window_start) {}

void FilterCache::push(Sample sample, InferenceOutput output) {
  if (sample.edge_id != edge_id_) {
    throw Error(Errc::InvalidArgument, "sample from edge '" + sample.edge_id +
                                           "' pushed into cache of '" + edge_id_ + "'");
  }
  if (!entries_.empty() && sample.seq <= entries_.back().sample.seq) {
    throw Error(Errc::InvalidArgument, "cache entries must be seq-ascending");
  }
  entries_.push_back(CacheEntry{std::move(sample), std::move(output)});
}

void FilterCache::clear(double next_window_start) {
  entries_.clear();
  window_start_ = next_window_start;
}

std::vector<ScoredSample> select_top(std::span<const CacheEntry> entries, const FilterConfig& cfg,
                                     double now) {
  if (entries.empty()) throw Error(Errc::EmptyCache, "nothing cached in this window");

  std::vector<ScoredSample> scored;
  scored.reserve(entries.size());
  for (const auto& entry : entries) {
    const double adapt = adaptability_score(entry.output);
    const double age = std::max(0.0, now - entry.sample.timestamp);
    const double timely = timeliness_score(age, cfg.window_seconds(), cfg.direction());
    const double quality = quality_score(adapt, timely, cfg);
    scored.emplace_back(entry.sample, entry.output, adapt, timely, quality, cfg);
  }

  const std::size_t keep = keep_count(cfg.keep_fraction(), scored.size());
  auto better = [](const ScoredSample& a, const ScoredSample& b) {
    if (a.quality() != b.quality()) return a.quality() > b.quality();
    return a.sample().seq > b.sample().seq;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), better);
  scored.erase(scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());
  return scored;
}

std::vector<ScoredSample> filter_window(FilterCache& cache, const FilterConfig& cfg, double now) {
  auto selected = select_top(cache.entries(), cfg, now);
  cache.clear(now);
  return selected;
}

}  // namespace edgesync
