#pragma once

// Edge-side sample scoring and top-k window selection.

#include <span>
#include <vector>

#include "edgesync/types.hpp"

namespace edgesync {

/// Shannon entropy (natural log) of the output distribution, 0*ln0 := 0.
/// Always in [0, ln C].
double adaptability_score(const InferenceOutput& output);

/// Sigmoid of the sample age relative to the window. 0.5 at age 0.
/// Throws NonPositiveWindow if window_seconds <= 0.
double timeliness_score(double age_seconds, double window_seconds,
                        TimelinessDirection direction = TimelinessDirection::FavorRecent);

inline double quality_score(double adaptability, double timeliness, const FilterConfig& cfg) {
  return cfg.alpha() * adaptability + cfg.beta() * timeliness;
}

/// ceil(keep_fraction * n), at least 1 for n >= 1. Products that land within
/// rounding noise of an integer are treated as that integer.
std::size_t keep_count(double keep_fraction, std::size_t n);

struct CacheEntry {
  Sample sample;
  InferenceOutput output;
};

/// Cache of (sample, inference) pairs for one edge and one window, ordered
/// by seq ascending.
class FilterCache {
 public:
  FilterCache() = default;
  FilterCache(EdgeId edge_id, double window_start);

  void push(Sample sample, InferenceOutput output);
  void clear(double next_window_start);

  const EdgeId& edge_id() const noexcept { return edge_id_; }
  double window_start() const noexcept { return window_start_; }
  std::span<const CacheEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  EdgeId edge_id_;
  double window_start_ = 0.0;
  std::vector<CacheEntry> entries_;
};

/// Scores every entry at time `now` and returns the top keep_count entries,
/// ordered by quality descending with the later seq winning ties. The result
/// does not depend on the order of `entries`.
std::vector<ScoredSample> select_top(std::span<const CacheEntry> entries, const FilterConfig& cfg,
                                     double now);

/// select_top over the cache, which is then cleared with window_start = now.
/// Throws EmptyCache.
std::vector<ScoredSample> filter_window(FilterCache& cache, const FilterConfig& cfg, double now);

}  // namespace edgesync
