#include "edgesync/urgency.hpp"

#include <cmath>

#include "edgesync/error.hpp"

namespace edgesync {

UrgencyConfig::UrgencyConfig(std::size_t capacity, std::size_t batch_count,
                             double decay_constant)
    : capacity_(capacity), batch_count_(batch_count), decay_constant_(decay_constant) {
  if (capacity == 0 || batch_count == 0) {
    throw Error(Errc::InvalidArgument, "bank capacity and batch count must be positive");
  }
  if (capacity % batch_count != 0) {
    throw Error(Errc::InvalidArgument, "bank capacity must be divisible by batch count");
  }
  if (!(decay_constant_ > 0.0)) decay_constant_ = static_cast<double>(batch_count);
  if (!std::isfinite(decay_constant_)) throw Error(Errc::NonFinite, "decay constant");
}

EdgeBank::EdgeBank(EdgeId edge_id, std::size_t capacity)
    : edge_id_(std::move(edge_id)), capacity_(capacity) {
  if (capacity == 0) throw Error(Errc::InvalidArgument, "bank capacity must be positive");
}

void EdgeBank::record(int correct, std::uint64_t seq) {
  records_.emplace_back(correct, seq);
  while (records_.size() > capacity_) records_.pop_front();
}

std::vector<double> batch_accuracies(const EdgeBank& bank, const UrgencyConfig& cfg) {
  if (bank.size() != cfg.capacity()) {
    throw Error(Errc::BankNotFull, "bank holds " + std::to_string(bank.size()) + " of " +
                                       std::to_string(cfg.capacity()) + " records");
  }
  const std::size_t len = cfg.batch_length();
  std::vector<double> sums(cfg.batch_count(), 0.0);
  std::size_t j = 0;
  for (const auto& rec : bank.records()) {
    sums[j / len] += rec.correct;
    ++j;
  }
  return sums;
}

std::vector<double> urgency_weights(const UrgencyConfig& cfg) {
  const double m = static_cast<double>(cfg.batch_count());
  std::vector<double> w(cfg.batch_count());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = m / (1.0 + std::exp(-static_cast<double>(i) / cfg.decay_constant()));
  }
  return w;
}

double urgency_degree(std::span<const double> batches, const UrgencyConfig& cfg) {
  if (batches.size() != cfg.batch_count()) {
    throw Error(Errc::LengthMismatch, "expected " + std::to_string(cfg.batch_count()) +
                                          " batches, got " + std::to_string(batches.size()));
  }
  const auto w = urgency_weights(cfg);
  double d = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i) d += (batches[0] - batches[i]) * w[i];
  return d;
}

double bank_urgency(const EdgeBank& bank, const UrgencyConfig& cfg) {
  if (bank.size() < cfg.capacity()) return 0.0;
  return urgency_degree(batch_accuracies(bank, cfg), cfg);
}

const EdgeId& select_edge(std::span<const EdgeCandidate> candidates) {
  if (candidates.empty()) throw Error(Errc::EmptyMap, "no edges to select from");
  const EdgeCandidate* best = &candidates.front();
  for (const auto& c : candidates.subspan(1)) {
    if (c.urgency > best->urgency) {
      best = &c;
    } else if (c.urgency == best->urgency) {
      if (c.last_update_time < best->last_update_time ||
          (c.last_update_time == best->last_update_time && c.edge_id < best->edge_id)) {
        best = &c;
      }
    }
  }
  return best->edge_id;
}

}  // namespace edgesync
