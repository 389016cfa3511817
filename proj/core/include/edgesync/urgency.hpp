#pragma once

// Cloud-side accuracy banking and urgency degree: which edge model has lost
// the most accuracy since it was last trained.

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "edgesync/types.hpp"

namespace edgesync {

class UrgencyConfig {
 public:
  /// decay_constant <= 0 selects the default, tm = batch_count.
  UrgencyConfig(std::size_t capacity = 90, std::size_t batch_count = 10,
                double decay_constant = 0.0);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t batch_count() const noexcept { return batch_count_; }
  std::size_t batch_length() const noexcept { return capacity_ / batch_count_; }
  double decay_constant() const noexcept { return decay_constant_; }

 private:
  std::size_t capacity_;
  std::size_t batch_count_;
  double decay_constant_;
};

/// Bounded FIFO of per-sample correctness, oldest first.
class EdgeBank {
 public:
  EdgeBank(EdgeId edge_id, std::size_t capacity);

  /// Appends, evicting the oldest record once over capacity.
  void record(int correct, std::uint64_t seq);
  void clear() { records_.clear(); }

  const EdgeId& edge_id() const noexcept { return edge_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool full() const noexcept { return records_.size() == capacity_; }
  const std::deque<AccuracyRecord>& records() const noexcept { return records_; }

 private:
  EdgeId edge_id_;
  std::size_t capacity_;
  std::deque<AccuracyRecord> records_;
};

/// m consecutive batch sums, index 0 = oldest. Throws BankNotFull.
std::vector<double> batch_accuracies(const EdgeBank& bank, const UrgencyConfig& cfg);

/// w_i = m / (1 + exp(-i / tm)). w_0 = m/2, increasing toward m.
std::vector<double> urgency_weights(const UrgencyConfig& cfg);

/// d = sum_i (wa_0 - wa_i) * w_i. Throws LengthMismatch if |batches| != m.
double urgency_degree(std::span<const double> batches, const UrgencyConfig& cfg);

/// Urgency for a bank, 0 when the bank is not yet full.
double bank_urgency(const EdgeBank& bank, const UrgencyConfig& cfg);

struct EdgeCandidate {
  EdgeId edge_id;
  double urgency = 0.0;
  double last_update_time = 0.0;
};

/// Highest urgency wins; ties go to the oldest last update, then the lowest
/// edge id. Throws EmptyMap.
const EdgeId& select_edge(std::span<const EdgeCandidate> candidates);

}  // namespace edgesync
