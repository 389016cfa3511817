#include <algorithm>
#include <cmath>
#include <random>

#include "edgesync/urgency.hpp"
#include "support.hpp"

namespace edgesync {
namespace {

EdgeBank filled(std::size_t n, const std::vector<int>& pattern) {
  EdgeBank bank("e", n);
  for (std::size_t i = 0; i < pattern.size(); ++i) bank.record(pattern[i], i);
  return bank;
}

TEST(EdgeBank, RecordAndEvict) {
  EdgeBank bank("e", 90);
  bank.record(1, 0);
  EXPECT_EQ(bank.size(), 1u);
  for (std::uint64_t s = 1; s < 89; ++s) bank.record(1, s);
  EXPECT_EQ(bank.size(), 89u);
  bank.record(0, 89);
  EXPECT_EQ(bank.size(), 90u);
  EXPECT_EQ(bank.records().front().seq, 0u);
  bank.record(1, 90);
  EXPECT_EQ(bank.size(), 90u);
  EXPECT_EQ(bank.records().front().seq, 1u);
  EXPECT_EQ(bank.records().back().seq, 90u);
}

TEST(EdgeBank, FifoAudit) {
  std::mt19937_64 rng(3);
  for (std::size_t cap : {1u, 7u, 90u}) {
    EdgeBank bank("e", cap);
    for (std::uint64_t s = 0; s < 1000; ++s) {
      bank.record(static_cast<int>(rng() % 2), s);
      ASSERT_LE(bank.size(), cap);
      // The bank holds exactly the most recent min(s+1, cap) seqs in order.
      const std::uint64_t first = s + 1 > cap ? s + 1 - cap : 0;
      std::uint64_t expect = first;
      for (const auto& r : bank.records()) ASSERT_EQ(r.seq, expect++);
      ASSERT_EQ(expect, s + 1);
    }
  }
}

TEST(EdgeBank, RejectsNonBinary) {
  EdgeBank bank("e", 3);
  EXPECT_ERRC(bank.record(2, 0), Errc::InvalidArgument);
  EXPECT_EQ(bank.size(), 0u);
}

TEST(UrgencyConfig, Invariants) {
  EXPECT_ERRC(UrgencyConfig(90, 7), Errc::InvalidArgument);
  EXPECT_ERRC(UrgencyConfig(0, 1), Errc::InvalidArgument);
  EXPECT_ERRC(UrgencyConfig(10, 0), Errc::InvalidArgument);
  const UrgencyConfig cfg;
  EXPECT_EQ(cfg.capacity(), 90u);
  EXPECT_EQ(cfg.batch_count(), 10u);
  EXPECT_EQ(cfg.batch_length(), 9u);
  EXPECT_EQ(cfg.decay_constant(), 10.0);
}

TEST(BatchAccuracies, Examples) {
  const UrgencyConfig cfg;
  EXPECT_EQ(batch_accuracies(filled(90, std::vector<int>(90, 1)), cfg), std::vector<double>(10, 9.0));
  EXPECT_EQ(batch_accuracies(filled(90, std::vector<int>(90, 0)), cfg), std::vector<double>(10, 0.0));
  std::vector<int> half(90, 0);
  std::fill(half.begin(), half.begin() + 45, 1);
  const std::vector<double> expect{9, 9, 9, 9, 9, 0, 0, 0, 0, 0};
  EXPECT_EQ(batch_accuracies(filled(90, half), cfg), expect);
}

TEST(BatchAccuracies, NotFull) {
  EXPECT_ERRC(batch_accuracies(filled(90, std::vector<int>(89, 1)), UrgencyConfig()),
              Errc::BankNotFull);
  EXPECT_EQ(bank_urgency(filled(90, std::vector<int>(89, 0)), UrgencyConfig()), 0.0);
}

TEST(UrgencyWeights, RecencyWeightedWithinBounds) {
  for (std::size_t m : {1u, 2u, 5u, 10u, 30u}) {
    for (double tm : {0.0, 1.0, 3.0, 100.0}) {
      const UrgencyConfig cfg(m * 3, m, tm);
      const auto w = urgency_weights(cfg);
      ASSERT_EQ(w.size(), m);
      const double md = static_cast<double>(m);
      EXPECT_DOUBLE_EQ(w[0], md / 2.0);
      for (std::size_t i = 1; i < m; ++i) {
        EXPECT_GT(w[i], w[i - 1]);
        EXPECT_GT(w[i], md / 2.0);
        EXPECT_LT(w[i], md);
      }
    }
  }
}

// Direct evaluation of the weighted-difference formula.
double oracle_degree(const std::vector<double>& wa, double tm) {
  const double m = static_cast<double>(wa.size());
  double d = 0.0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    const double w = m * (1.0 / (1.0 + std::exp(-static_cast<double>(i) / tm)));
    d += (wa[0] - wa[i]) * w;
  }
  return d;
}

TEST(UrgencyDegree, Examples) {
  const UrgencyConfig cfg;
  EXPECT_EQ(urgency_degree(std::vector<double>(10, 4.0), cfg), 0.0);

  const UrgencyConfig two(2, 2, 2.0);
  const std::vector<double> b{9.0, 0.0};
  const double expect = 9.0 * (1.0 / (1.0 + std::exp(-0.5))) * 2.0;
  EXPECT_NEAR(urgency_degree(b, two), expect, 1e-12);
  EXPECT_NEAR(urgency_degree(b, two), 11.204, 5e-4);

  EXPECT_ERRC(urgency_degree(std::vector<double>(9, 0.0), cfg), Errc::LengthMismatch);
}

TEST(UrgencyDegree, MatchesOracleAndSignProperties) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 9.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 12);
    const double tm = trial % 2 == 0 ? 0.0 : 0.5 + u(rng);
    const UrgencyConfig cfg(m, m, tm);
    std::vector<double> wa(m);
    for (auto& x : wa) x = std::round(u(rng));

    const double d = urgency_degree(wa, cfg);
    EXPECT_NEAR(d, oracle_degree(wa, cfg.decay_constant()), 1e-9);

    // Mirror each deviation around wa_0: the degree flips sign.
    std::vector<double> mirrored(m);
    for (std::size_t i = 0; i < m; ++i) mirrored[i] = 2.0 * wa[0] - wa[i];
    EXPECT_NEAR(urgency_degree(mirrored, cfg), -d, 1e-9);

    // Every later batch strictly worse than the reference: positive.
    std::vector<double> worse(m);
    worse[0] = 9.0;
    for (std::size_t i = 1; i < m; ++i) worse[i] = std::min(8.0, u(rng));
    EXPECT_GT(urgency_degree(worse, cfg), 0.0);

    // Strictly improving sequence: negative.
    std::vector<double> better(m);
    better[0] = u(rng);
    for (std::size_t i = 1; i < m; ++i) better[i] = better[i - 1] + 0.01 + u(rng);
    EXPECT_LT(urgency_degree(better, cfg), 0.0);
  }
}

TEST(SelectEdge, Examples) {
  const std::vector<EdgeCandidate> a{{"A", 0.0, 0.0}, {"B", 11.2, 0.0}};
  EXPECT_EQ(select_edge(a), "B");
  const std::vector<EdgeCandidate> b{{"B", 5.0, 3.0}, {"A", 5.0, 1.0}};
  EXPECT_EQ(select_edge(b), "A");
  const std::vector<EdgeCandidate> b2{{"A", 5.0, 3.0}, {"B", 5.0, 1.0}};
  EXPECT_EQ(select_edge(b2), "B");
  const std::vector<EdgeCandidate> c{{"A", -3.0, 0.0}};
  EXPECT_EQ(select_edge(c), "A");
  const std::vector<EdgeCandidate> d{{"b", 1.0, 2.0}, {"a", 1.0, 2.0}};
  EXPECT_EQ(select_edge(d), "a");
  EXPECT_ERRC(select_edge(std::span<const EdgeCandidate>{}), Errc::EmptyMap);
}

TEST(SelectEdge, PermutationInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<EdgeCandidate> cands;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values so ties on urgency and update time are common.
      cands.push_back({"edge-" + std::to_string(rng() % 100), static_cast<double>(rng() % 3),
                       static_cast<double>(rng() % 3)});
    }
    // Distinct ids, as in a map.
    std::sort(cands.begin(), cands.end(),
              [](const auto& x, const auto& y) { return x.edge_id < y.edge_id; });
    cands.erase(std::unique(cands.begin(), cands.end(),
                            [](const auto& x, const auto& y) { return x.edge_id == y.edge_id; }),
                cands.end());
    // Oracle: lexicographic minimum of (-urgency, last_update, id).
    const auto oracle = *std::min_element(cands.begin(), cands.end(), [](const auto& x, const auto& y) {
      return std::tuple(-x.urgency, x.last_update_time, x.edge_id) <
             std::tuple(-y.urgency, y.last_update_time, y.edge_id);
    });
    for (int p = 0; p < 5; ++p) {
      std::shuffle(cands.begin(), cands.end(), rng);
      ASSERT_EQ(select_edge(cands), oracle.edge_id);
    }
  }
}

}  // namespace
}  // namespace edgesync
