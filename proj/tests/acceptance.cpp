// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check compares the library against an oracle written here,
// independently of the implementation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "edgesync/bho.hpp"
#include "edgesync/coordinator.hpp"
#include "edgesync/edge_agent.hpp"
#include "edgesync/error.hpp"
#include "edgesync/filter.hpp"
#include "edgesync/harness.hpp"
#include "edgesync/modelkit.hpp"
#include "edgesync/proto.hpp"
#include "edgesync/trainer.hpp"
#include "edgesync/urgency.hpp"

namespace {

using namespace edgesync;
using WallClock = std::chrono::steady_clock;

// Collects failed expectations; the first few are reported.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (ok) return;
    ++failures_;
    if (notes_.size() < 3) notes_.push_back(what);
  }
  void note(std::string s) { info_.push_back(std::move(s)); }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::ostringstream os;
    os << count_ - failures_ << "/" << count_ << " checks";
    for (const auto& i : info_) os << "; " << i;
    for (const auto& n : notes_) os << "; FAILED: " << n;
    return os.str();
  }

 private:
  std::size_t count_ = 0;
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
  std::vector<std::string> info_;
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Oracles

using LD = long double;

LD oracle_entropy(const std::vector<double>& raw) {
  LD sum = 0;
  for (double x : raw) sum += x;
  LD h = 0;
  for (double x : raw) {
    const LD p = x / sum;
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

LD oracle_timeliness(double age, double window, bool favor_recent) {
  const LD r = static_cast<LD>(age) / window;
  return 1.0L / (1.0L + std::exp(favor_recent ? r : -r));
}

LD oracle_urgency(const std::vector<int>& bits, std::size_t m, double tm) {
  const std::size_t len = bits.size() / m;
  std::vector<LD> wa(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < len; ++j) wa[i] += bits[i * len + j];
  }
  LD d = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const LD w = static_cast<LD>(m) / (1.0L + std::exp(-static_cast<LD>(i) / tm));
    d += (wa[0] - wa[i]) * w;
  }
  return d;
}

LD oracle_ei(double mu, double var, double best) {
  if (var <= 0) return std::max<LD>(mu - best, 0);
  const LD s = std::sqrt(static_cast<LD>(var));
  const LD z = (mu - static_cast<LD>(best)) / s;
  const LD cdf = 0.5L * std::erfc(-z / std::sqrt(2.0L));
  const LD pdf = std::exp(-0.5L * z * z) / std::sqrt(2.0L * 3.14159265358979323846264338327950288L);
  return (mu - static_cast<LD>(best)) * cdf + s * pdf;
}

// Dense Gaussian elimination with partial pivoting: solves A X = B in place.
void oracle_solve(std::vector<std::vector<LD>> a, std::vector<std::vector<LD>>& b) {
  const std::size_t n = a.size();
  const std::size_t r = b[0].size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < n; ++i) {
      if (std::fabs(a[i][c]) > std::fabs(a[piv][c])) piv = i;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t i = c + 1; i < n; ++i) {
      const LD f = a[i][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[i][k] -= f * a[c][k];
      for (std::size_t k = 0; k < r; ++k) b[i][k] -= f * b[c][k];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    for (std::size_t k = 0; k < r; ++k) {
      LD s = b[c][k];
      for (std::size_t j = c + 1; j < n; ++j) s -= a[c][j] * b[j][k];
      b[c][k] = s / a[c][c];
    }
  }
}

struct GpOracle {
  LD mean;
  LD variance;
};

GpOracle oracle_gp(const std::vector<bho::Observation>& obs, const bho::GaussianProcess::Kernel& k,
                   double mean_constant, double extra_jitter, const std::vector<double>& q) {
  auto kern = [&](const std::vector<double>& a, const std::vector<double>& b) {
    LD d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (static_cast<LD>(a[i]) - b[i]) * (static_cast<LD>(a[i]) - b[i]);
    return static_cast<LD>(k.variance) * std::exp(-d2 / (2.0L * k.lengthscale * k.lengthscale));
  };
  const std::size_t n = obs.size();
  std::vector<std::vector<LD>> a(n, std::vector<LD>(n));
  std::vector<std::vector<LD>> rhs(n, std::vector<LD>(2));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i][j] = kern(obs[i].point, obs[j].point);
    a[i][i] += static_cast<LD>(k.noise_variance) + extra_jitter;
    rhs[i][0] = obs[i].value - static_cast<LD>(mean_constant);
    rhs[i][1] = kern(obs[i].point, q);
  }
  std::vector<LD> ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = rhs[i][1];
  oracle_solve(a, rhs);
  LD mean = mean_constant;
  LD quad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += ks[i] * rhs[i][0];
    quad += ks[i] * rhs[i][1];
  }
  return {mean, std::max<LD>(kern(q, q) - quad, 0)};
}

// Independent trainer stop rule: returns (epochs run, best epoch) with the
// initial reference 0 and strict improvement.
std::pair<int, int> oracle_stop(const std::vector<double>& evals, int patience) {
  double best = 0.0;
  int best_epoch = 0;
  for (int e = 1;; ++e) {
    const double v = evals[std::min<std::size_t>(e - 1, evals.size() - 1)];
    if (v > best) {
      best = v;
      best_epoch = e;
    }
    if (e - best_epoch > patience) return {e, best_epoch};
  }
}

// Trainable stub whose single parameter is the epoch number and whose
// holdout evaluation follows a script.
class ScriptStub final : public TrainableModel {
 public:
  ScriptStub(std::vector<double> evals, std::function<void()> hook = {})
      : evals_(std::move(evals)), hook_(std::move(hook)) {}
  void begin_session() override { epoch_ = 0; }
  double train_epoch(std::span<const LabeledSample>, const HyperParams&) override {
    value_ = ++epoch_;
    if (hook_) hook_();
    return 0.0;
  }
  double evaluate(std::span<const LabeledSample>) const override {
    return evals_[std::min<std::size_t>(epoch_ - 1, evals_.size() - 1)];
  }
  std::vector<double> trainable_values() const override { return {value_}; }
  void set_trainable_values(std::span<const double> v) override { value_ = v[0]; }
  double value() const { return value_; }

 private:
  std::vector<double> evals_;
  std::function<void()> hook_;
  int epoch_ = 0;
  double value_ = 0.0;
};

std::vector<LabeledSample> dummy_set(std::size_t n) {
  std::vector<LabeledSample> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = LabeledSample{{static_cast<double>(i)}, 0};
  return v;
}

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n, bool allow_zero) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = allow_zero && u(rng) < 0.2 ? 0.0 : std::pow(u(rng), 3.0) + 1e-12;
  return v;
}

// ---------------------------------------------------------------------------
// Criteria

Checks criterion1() {
  Checks c;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LD worst = 0;

  for (int t = 0; t < 2000; ++t) {
    const auto raw = random_probs(rng, 1 + rng() % 12, true);
    if (std::accumulate(raw.begin(), raw.end(), 0.0) == 0.0) continue;
    const auto out = validate_probs(raw);
    const LD err = std::fabs(adaptability_score(out) - oracle_entropy(raw));
    worst = std::max(worst, err);
    c.expect(err <= 1e-8, "entropy trial " + std::to_string(t));
  }
  for (int t = 0; t < 2000; ++t) {
    const double age = 500.0 * u(rng);
    const double w = 0.1 + 300.0 * u(rng);
    for (bool recent : {true, false}) {
      const auto dir = recent ? TimelinessDirection::FavorRecent : TimelinessDirection::FavorOlder;
      const LD err = std::fabs(timeliness_score(age, w, dir) - oracle_timeliness(age, w, recent));
      worst = std::max(worst, err);
      c.expect(err <= 1e-8, "timeliness trial " + std::to_string(t));
    }
  }

  // Quality through the filter, and the hand-enumerated order of the result.
  for (int t = 0; t < 300; ++t) {
    const double alpha = u(rng) * 3.0;
    const double beta = u(rng) * 3.0;
    const double window = 1.0 + 100.0 * u(rng);
    const FilterConfig cfg(alpha, beta, 1.0, window);
    const std::size_t n = 1 + rng() % 40;
    std::vector<CacheEntry> entries;
    std::vector<std::vector<double>> raws;
    for (std::size_t i = 0; i < n; ++i) {
      raws.push_back(random_probs(rng, 5, false));
      entries.push_back({Sample{"e", i, window * u(rng), {0.0}, 0}, validate_probs(raws.back())});
    }
    const double now = window;
    const auto got = select_top(entries, cfg, now);
    c.expect(got.size() == n, "keep 1.0 keeps all");
    std::vector<std::pair<LD, std::uint64_t>> oracle;
    for (std::size_t i = 0; i < n; ++i) {
      const LD q = alpha * oracle_entropy(raws[i]) +
                   beta * oracle_timeliness(now - entries[i].sample.timestamp, window, true);
      oracle.emplace_back(q, i);
    }
    for (const auto& s : got) {
      const LD q = oracle[s.sample().seq].first;
      const LD err = std::fabs(s.quality() - q);
      worst = std::max(worst, err);
      c.expect(err <= 1e-8, "quality trial " + std::to_string(t));
    }
    // Order: quality descending, later seq first on ties (exact).
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (got[a].quality() != got[b].quality()) return got[a].quality() > got[b].quality();
      return got[a].sample().seq > got[b].sample().seq;
    });
    for (std::size_t i = 0; i < n; ++i) c.expect(idx[i] == i, "sort order trial " + std::to_string(t));
  }

  // Urgency from raw correctness bits.
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng() % 12;
    const std::size_t len = 1 + rng() % 10;
    const double tm = t % 3 == 0 ? 0.0 : 0.5 + 20.0 * u(rng);
    const UrgencyConfig cfg(m * len, m, tm);
    const double p_hit = u(rng);
    std::vector<int> bits(m * len);
    EdgeBank bank("e", m * len);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      bits[i] = u(rng) < p_hit ? 1 : 0;
      bank.record(bits[i], i);
    }
    const LD err = std::fabs(bank_urgency(bank, cfg) - oracle_urgency(bits, m, cfg.decay_constant()));
    worst = std::max(worst, err);
    c.expect(err <= 1e-8, "urgency trial " + std::to_string(t));
  }

  for (int t = 0; t < 5000; ++t) {
    const double mu = 6.0 * u(rng) - 3.0;
    const double var = t % 10 == 0 ? 0.0 : std::pow(10.0, -6.0 + 7.0 * u(rng));
    const double best = 6.0 * u(rng) - 3.0;
    const LD err = std::fabs(bho::expected_improvement(mu, var, best) - oracle_ei(mu, var, best));
    worst = std::max(worst, err);
    c.expect(err <= 1e-8, "EI trial " + std::to_string(t));
  }

  for (int t = 0; t < 300; ++t) {
    bho::GaussianProcess::Kernel k;
    k.lengthscale = 0.15 + 0.5 * u(rng);
    k.variance = 0.5 + u(rng);
    k.noise_variance = std::pow(10.0, -4.0 + 2.0 * u(rng));
    std::vector<bho::Observation> obs;
    const std::size_t n = 1 + rng() % 15;
    for (std::size_t i = 0; i < n; ++i) {
      obs.push_back({{u(rng), u(rng), u(rng)}, 4.0 * u(rng) - 2.0});
    }
    const double m0 = u(rng) - 0.5;
    const bho::GaussianProcess gp(obs, k, m0);
    for (int qi = 0; qi < 5; ++qi) {
      const std::vector<double> q = qi == 0 ? obs[0].point : std::vector<double>{u(rng), u(rng), u(rng)};
      const auto p = gp.predict(q);
      const auto o = oracle_gp(obs, k, m0, gp.jitter(), q);
      const LD err = std::max(std::fabs(p.mean - o.mean), std::fabs(p.variance - o.variance));
      worst = std::max(worst, err);
      c.expect(err <= 1e-8, "GP trial " + std::to_string(t));
    }
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "max abs error %.2e", static_cast<double>(worst));
  c.note(buf);
  return c;
}

Checks criterion2() {
  Checks c;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t ties = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 300;
    const std::uint64_t per_mille = t % 10 == 0 ? 700 : 1 + rng() % 1000;
    const double k = static_cast<double>(per_mille) / 1000.0;
    const double window = 10.0 + 90.0 * u(rng);
    const FilterConfig cfg(0.2 + u(rng), 0.2 + u(rng), k, window);

    // A small pool of outputs and timestamps so that equal qualities occur.
    std::vector<std::vector<double>> pool;
    for (int i = 0; i < 4; ++i) pool.push_back(random_probs(rng, 6, false));
    std::vector<CacheEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      const double ts = std::floor(window * u(rng) / 10.0) * 10.0;
      entries.push_back({Sample{"e", 1000 + i, ts, {0.0}, 0}, validate_probs(pool[rng() % pool.size()])});
    }
    const auto got = select_top(entries, cfg, window);
    const std::size_t expect = std::max<std::size_t>(1, (per_mille * n + 999) / 1000);
    c.expect(got.size() == expect, "size at trial " + std::to_string(t));

    for (std::size_t i = 1; i < got.size(); ++i) {
      const bool desc = got[i - 1].quality() > got[i].quality() ||
                        (got[i - 1].quality() == got[i].quality() &&
                         got[i - 1].sample().seq > got[i].sample().seq);
      c.expect(desc, "order at trial " + std::to_string(t));
      if (got[i - 1].quality() == got[i].quality()) ++ties;
    }

    // Brute-force top-k over every entry's score.
    const auto all = select_top(entries, cfg.with_keep_fraction(1.0), window);
    std::vector<std::pair<double, std::uint64_t>> ranked;
    for (const auto& s : all) ranked.emplace_back(s.quality(), s.sample().seq);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second > b.second;
    });
    bool same = true;
    for (std::size_t i = 0; i < got.size(); ++i) same = same && got[i].sample().seq == ranked[i].second;
    c.expect(same, "top-k set at trial " + std::to_string(t));

    for (int p = 0; p < 3; ++p) {
      auto shuffled = entries;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      c.expect(select_top(shuffled, cfg, window) == got, "permutation at trial " + std::to_string(t));
    }
    c.expect(select_top(entries, cfg, window) == got, "determinism at trial " + std::to_string(t));
  }
  c.note("adjacent equal-quality pairs " + std::to_string(ties));
  return c;
}

Checks criterion3() {
  Checks c;
  const auto data = dummy_set(20);
  TrainerConfig cfg;
  cfg.max_time = 1e9;

  {
    ScriptStub m({0.5, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6});
    SimClock clock;
    cfg.patience = 5;
    const auto r = train_until_stop(m, data, cfg, clock);
    c.expect(r.epochs_run == 8 && r.best_epoch == 2 && r.best_eval == 0.6 &&
                 r.stop_reason == StopReason::Patience && m.value() == 2.0,
             "plateau trace: epochs " + std::to_string(r.epochs_run));
  }
  {
    ScriptStub m({0.7});
    SimClock clock;
    cfg.patience = 5;
    const auto r = train_until_stop(m, data, cfg, clock);
    c.expect(r.epochs_run == 7 && r.best_epoch == 1 && r.stop_reason == StopReason::Patience,
             "constant eval runs patience+2: " + std::to_string(r.epochs_run));
  }
  {
    std::vector<double> rising;
    for (int i = 1; i <= 500; ++i) rising.push_back(i / 500.0);
    SimClock clock;
    ScriptStub m(rising, [&] { clock.advance(1.0); });
    TrainerConfig tiny = cfg;
    tiny.max_time = 2.5;
    const auto r = train_until_stop(m, data, tiny, clock);
    // Elapsed 0,1,2 < 2.5 before epochs 1..3; 3 >= 2.5 after epoch 3.
    c.expect(r.stop_reason == StopReason::TimeCap && r.epochs_run == 3 && r.best_epoch == 3,
             "time cap trace: epochs " + std::to_string(r.epochs_run));
  }

  std::mt19937_64 rng(303);
  for (int t = 0; t < 3000; ++t) {
    std::vector<double> evals(50);
    for (auto& e : evals) e = static_cast<double>(rng() % 5) / 4.0 - (t % 7 == 0 ? 0.5 : 0.0);
    if (t % 4 == 0) std::sort(evals.begin(), evals.end(), std::greater<>());
    if (t % 4 == 1) std::sort(evals.begin(), evals.end());
    const int patience = 1 + static_cast<int>(rng() % 8);
    ScriptStub m(evals);
    SimClock clock;
    TrainerConfig tc = cfg;
    tc.patience = patience;
    const auto r = train_until_stop(m, data, tc, clock);
    const auto [stop, best] = oracle_stop(evals, patience);
    c.expect(r.epochs_run == stop && r.best_epoch == best, "stop rule at trial " + std::to_string(t));
    // Returned parameters are the best epoch's (0: the initial value).
    c.expect(m.value() == static_cast<double>(best), "checkpoint at trial " + std::to_string(t));
    c.expect(r.trainable == std::vector<double>{static_cast<double>(best)}, "report trainable");
  }
  return c;
}

Checks criterion4() {
  Checks c;
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ModelDims dims{6, 10, 4};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    StudentModel model(make_initial_params(dims, 1000 + t), 1);
    std::vector<double> theta(dims.trainable_size());
    for (auto& x : theta) x = 0.5 * g(rng);
    model.set_trainable_values(theta);
    std::vector<LabeledSample> batch(1 + rng() % 8);
    for (auto& s : batch) {
      s.features.resize(dims.feature_dim);
      for (auto& x : s.features) x = 2.0 * g(rng);
      s.label = static_cast<std::uint32_t>(rng() % dims.class_count);
    }
    const double wd = t % 3 == 0 ? 0.0 : 1e-2 * u(rng);
    const auto analytic = model.loss_and_gradient(batch, wd).gradient;

    const double h = 1e-5;
    std::vector<double> fd(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto plus = theta;
      auto minus = theta;
      plus[i] += h;
      minus[i] -= h;
      model.set_trainable_values(plus);
      const double lp = model.loss_and_gradient(batch, wd).loss;
      model.set_trainable_values(minus);
      const double lm = model.loss_and_gradient(batch, wd).loss;
      fd[i] = (lp - lm) / (2.0 * h);
    }
    model.set_trainable_values(theta);
    double diff = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      diff += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
      na += analytic[i] * analytic[i];
      nf += fd[i] * fd[i];
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
    worst = std::max(worst, rel);
    c.expect(rel < 1e-5, "gradient trial " + std::to_string(t) + " rel " + std::to_string(rel));
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "max relative error %.2e", worst);
  c.note(buf);
  return c;
}

Checks criterion5() {
  Checks c;
  // One active coordinate embedded in the 3-D search cube; the others are inert.
  const double opt = 0.3;
  const auto f = [&](std::span<const double> p) { return -(p[0] - opt) * (p[0] - opt); };
  double grid_x = 0.0, grid_v = -1e300;
  for (int i = 0; i < 10000; ++i) {
    const double x = (i + 0.5) / 10000.0;
    const double v = -(x - opt) * (x - opt);
    if (v > grid_v) {
      grid_v = v;
      grid_x = x;
    }
  }
  std::string dist;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    bho::BhoConfig cfg;
    cfg.seed = seed;
    cfg.max_evaluations = 25;
    const auto r = bho::bho_optimize(f, cfg);
    const double d = std::fabs(r.best_point[0] - grid_x);
    dist += (seed > 1 ? "," : "") + fmt(d);
    c.expect(r.trace.size() <= 25, "evaluation budget, seed " + std::to_string(seed));
    c.expect(d <= 0.05, "distance to grid optimum, seed " + std::to_string(seed));
    c.expect(r.best_value <= grid_v + 1e-12, "no better than the grid, seed " + std::to_string(seed));
  }
  c.note("distance per seed " + dist);
  return c;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

Checks criterion6() {
  Checks c;
  const auto cfg = default_experiment();
  int wins = 0;
  std::string rows;
  for (auto seed : kSeeds) {
    const double es = run_experiment(cfg, Strategy::EdgeSync, seed).accuracy();
    const double na = run_experiment(cfg, Strategy::NoAdaptation, seed).accuracy();
    const double fi = run_experiment(cfg, Strategy::FixedInterval, seed).accuracy();
    const bool win = es >= na + 0.10 && es >= fi + 0.02;
    wins += win;
    rows += " s" + std::to_string(seed) + "=" + fmt(es, 3) + "/" + fmt(na, 3) + "/" + fmt(fi, 3);
  }
  c.expect(wins >= 3, "seeds meeting both margins: " + std::to_string(wins));
  c.note("EdgeSync/NoAdaptation/FixedInterval" + rows + "; " + std::to_string(wins) + "/5 seeds");
  return c;
}

Checks criterion7() {
  Checks c;
  const auto cfg = drift_vs_stationary_experiment();
  const EdgeId drifting = cfg.workloads[0].edge_id;
  std::size_t total = 0, hits = 0;
  for (auto seed : kSeeds) {
    const auto r = run_experiment(cfg, Strategy::EdgeSync, seed);
    for (const auto& cy : r.cycles) {
      ++total;
      hits += cy.selected == drifting;
    }
  }
  const double share = total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  c.expect(total > 0 && share >= 0.8, "drifting share " + fmt(share));
  c.note("drifting edge picked in " + std::to_string(hits) + " of " + std::to_string(total) +
         " cycles (" + fmt(100.0 * share, 1) + "%)");
  return c;
}

Checks criterion8() {
  Checks c;
  const auto cfg = default_experiment();
  const std::vector<double> fractions{0.2, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const auto rows = sweep_filter_fraction(cfg, fractions, kSeeds);
  int wins = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    std::map<double, double> acc;
    for (const auto& r : rows) {
      if (r.seed == seed) acc[r.parameter] = r.accuracy;
    }
    double best_interior = -1.0, best_f = 0.0;
    for (double f : fractions) {
      if (f >= 0.5 && f <= 0.9 && acc[f] > best_interior) {
        best_interior = acc[f];
        best_f = f;
      }
    }
    const bool win = best_interior > acc[0.2] && best_interior > acc[1.0];
    wins += win;
    detail += " s" + std::to_string(seed) + ":" + fmt(best_f, 1) + "=" + fmt(best_interior, 3) +
              " vs " + fmt(acc[0.2], 3) + "/" + fmt(acc[1.0], 3);
  }
  c.expect(wins >= 3, "seeds with an interior winner: " + std::to_string(wins));
  c.note("best interior vs 0.2/1.0" + detail + "; " + std::to_string(wins) + "/5 seeds");
  return c;
}

Checks criterion9() {
  Checks c;
  const auto cfg = default_experiment();
  const std::vector<std::size_t> counts{1, 2, 4, 7};
  const auto rows = sweep_edge_count(cfg, counts, kSeeds);
  std::map<std::string, std::map<std::uint64_t, std::map<std::size_t, double>>> acc;
  for (const auto& r : rows) acc[r.strategy][r.seed][static_cast<std::size_t>(r.parameter)] = r.accuracy;

  std::vector<double> means;
  for (auto k : counts) {
    double s = 0.0;
    for (auto seed : kSeeds) s += acc["EdgeSync"][seed][k];
    means.push_back(s / kSeeds.size());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < means.size(); ++i) monotone = monotone && means[i] <= means[i - 1];
  c.expect(monotone, "seed-mean EdgeSync accuracy non-increasing in edge count");

  int wins = 0;
  for (auto seed : kSeeds) {
    const double es = acc["EdgeSync"][seed][1] - acc["EdgeSync"][seed][7];
    const double fi = acc["FixedInterval"][seed][1] - acc["FixedInterval"][seed][7];
    wins += es < fi;
  }
  c.expect(wins >= 3, "seeds with smaller EdgeSync decline: " + std::to_string(wins));
  std::string m;
  for (std::size_t i = 0; i < counts.size(); ++i) m += (i ? "/" : "") + fmt(means[i], 3);
  c.note("EdgeSync means over {1,2,4,7} " + m + "; smaller 1->7 decline in " + std::to_string(wins) + "/5 seeds");
  return c;
}

class SeqLabels final : public LabelSource {
 public:
  std::uint32_t label(const EdgeId&, const proto::UploadedSample& s) const override {
    return static_cast<std::uint32_t>(s.seq % 3);
  }
};

Checks criterion10() {
  Checks c;
  std::mt19937_64 rng(1010);
  std::normal_distribution<double> g(0.0, 1e3);
  auto reals = [&](std::size_t max_len) {
    std::vector<double> v(rng() % (max_len + 1));
    for (auto& x : v) {
      switch (rng() % 6) {
        case 0: x = -0.0; break;
        case 1: x = std::numeric_limits<double>::denorm_min(); break;
        case 2: x = std::numeric_limits<double>::max(); break;
        default: x = g(rng);
      }
    }
    return v;
  };
  auto text = [&] {
    std::string s(rng() % 16, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng());
    return s;
  };
  std::size_t crashes = 0;
  for (int i = 0; i < 10000; ++i) {
    proto::Message msg = proto::RequestBatch{rng()};
    switch (rng() % 5) {
      case 0: {
        std::vector<proto::UploadedSample> ups(1 + rng() % 5);
        for (auto& s : ups) s = {rng(), g(rng), reals(6), reals(6), static_cast<std::uint32_t>(rng())};
        msg = proto::SampleBatch(text(), rng(), std::move(ups));
        break;
      }
      case 1: msg = proto::ModelUpdate{text(), rng(), reals(64)}; break;
      case 2: msg = proto::UpdateAck{text(), rng()}; break;
      case 3:
        msg = proto::Register{text(), static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()), rng()};
        break;
      default: break;
    }
    try {
      const auto bytes = proto::encode(msg);
      const auto back = proto::decode(bytes);
      c.expect(back == msg, "structural equality at message " + std::to_string(i));
      c.expect(proto::encode(back) == bytes, "byte equality at message " + std::to_string(i));
      // Corrupted copies may fail, but only with the codec's typed errors.
      auto bad = bytes;
      bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      bad.resize(rng() % (bad.size() + 1));
      try {
        proto::decode(bad);
      } catch (const Error&) {
      }
    } catch (...) {
      ++crashes;
    }
  }
  c.expect(crashes == 0, "crashes " + std::to_string(crashes));

  // The trainable partition the cloud produced is what the edge applies, bit for bit.
  const ModelDims dims{8, 16, 4};
  const StudentModel initial(make_initial_params(dims, 9), 1);
  SimClock clock;
  CoordinatorConfig cc;
  cc.trainer.patience = 2;
  Coordinator coord(cc, clock, std::make_shared<SeqLabels>());
  EdgeAgent agent("e1", initial, FilterConfig{});
  coord.register_edge(agent.registration(), initial);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::uint64_t round = 0; round < 20; ++round) {
    std::vector<proto::UploadedSample> ups;
    for (std::uint64_t s = 0; s < 40; ++s) {
      std::vector<double> f(dims.feature_dim);
      for (auto& x : f) x = n(rng);
      ups.push_back({round * 40 + s, 0.0, f, {0.25, 0.25, 0.25, 0.25}, 0});
    }
    coord.ingest_batch(proto::SampleBatch("e1", round, std::move(ups)));
    const auto result = coord.train_edge("e1");
    const auto wire = proto::decode(proto::encode(*result.update));
    agent.apply_update(std::get<proto::ModelUpdate>(wire));
    const auto cloud = coord.current_model("e1")->trainable_values;
    const auto params = agent.model().params();
    const auto applied = params.trainable();
    c.expect(applied.size() == cloud.size() &&
                 std::memcmp(applied.data(), cloud.data(), cloud.size() * sizeof(double)) == 0,
             "bitwise update at round " + std::to_string(round));
    c.expect(agent.version() == round + 1, "version at round " + std::to_string(round));
  }
  c.note("10000 messages, 20 dispatched updates");
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Checks criterion11() {
  Checks c;
  for (const auto& cfg : {default_experiment(), drift_vs_stationary_experiment()}) {
    for (auto s : {Strategy::NoAdaptation, Strategy::OneTimeAdaptation, Strategy::FixedInterval,
                   Strategy::EdgeSync}) {
      for (std::uint64_t seed : {1u, 7u}) {
        const auto a = report_to_json(run_experiment(cfg, s, seed));
        const auto b = report_to_json(run_experiment(cfg, s, seed));
        c.expect(a == b, cfg.name + " " + to_string(s) + " seed " + std::to_string(seed));
      }
    }
  }
#ifdef EDGESYNC_HARNESS_BIN
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("edgesync-acceptance-" + std::to_string(::getpid()));
  for (const char* strategy : {"edgesync", "fixed"}) {
    for (const char* run : {"a", "b"}) {
      const std::string cmd = std::string("\"") + EDGESYNC_HARNESS_BIN + "\" run --strategy " + strategy +
                              " --seed 11 --out \"" + (root / strategy / run).string() + "\" > /dev/null 2>&1";
      c.expect(std::system(cmd.c_str()) == 0, std::string("harness run ") + strategy);
    }
    for (const char* file : {"report.json", "series.csv", "cycles.csv"}) {
      const auto a = slurp(root / strategy / "a" / file);
      c.expect(!a.empty() && a == slurp(root / strategy / "b" / file),
               std::string("CLI ") + strategy + " " + file + " identical");
    }
  }
  fs::remove_all(root);
  c.note("library reports for 4 strategies x 2 presets x 2 seeds, CLI output files for 2 strategies");
#else
  c.note("library reports for 4 strategies x 2 presets x 2 seeds");
#endif
  return c;
}

Checks criterion12() {
  Checks c;
  auto cfg = default_experiment();
  // Looking up the offline h0 is all the profiling a cycle does.
  cfg.coordinator.costs.profiling_seconds_per_cycle = 1e-4;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto es = run_experiment(cfg, Strategy::EdgeSync, seed);
    const auto fi = run_experiment(cfg, Strategy::FixedInterval, seed);
    c.expect(es.profiling_share() < 0.001, "profiling share seed " + std::to_string(seed));
    c.expect(!es.cycles.empty() && es.mean_cycle_seconds() < fi.mean_cycle_seconds(),
             "cycle time seed " + std::to_string(seed));
    for (const auto& cy : es.cycles) {
      const double sum = cy.label_seconds + cy.train_seconds + cy.profiling_seconds + cy.communication_seconds;
      c.expect(cy.label_seconds >= 0 && cy.train_seconds >= 0 && cy.profiling_seconds >= 0 &&
                   cy.communication_seconds >= 0 && std::fabs(sum - cy.total_seconds()) < 1e-9,
               "decomposition seed " + std::to_string(seed));
    }
    if (seed == 1) {
      detail = "seed 1: EdgeSync cycle " + fmt(es.mean_cycle_seconds(), 2) + " s, profiling share " +
               fmt(100.0 * es.profiling_share(), 5) + "%; FixedInterval (" +
               std::to_string(cfg.baselines.fixed_epochs) + " epochs) cycle " +
               fmt(fi.mean_cycle_seconds(), 2) + " s";
    }
  }
  c.note(detail);
  return c;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no limit
  Checks (*run)();
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "scoring math oracles", 10.0, criterion1},
      {2, "filter contract on 1000 fuzzed caches", 30.0, criterion2},
      {3, "trainer stop traces and checkpoint property", 0.0, criterion3},
      {4, "student gradient check", 30.0, criterion4},
      {5, "BHO on the embedded quadratic", 60.0, criterion5},
      {6, "drift recovery", 300.0, criterion6},
      {7, "urgency targeting", 0.0, criterion7},
      {8, "filter-ratio sweep", 0.0, criterion8},
      {9, "camera scaling", 0.0, criterion9},
      {10, "protocol fuzz and bitwise update", 0.0, criterion10},
      {11, "determinism", 0.0, criterion11},
      {12, "cycle-time accounting", 0.0, criterion12},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = WallClock::now();
    Checks result;
    bool threw = false;
    std::string error;
    try {
      result = cr.run();
    } catch (const std::exception& e) {
      threw = true;
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(WallClock::now() - t0).count();
    const bool in_time = cr.limit_seconds == 0.0 || secs < cr.limit_seconds;
    const bool pass = !threw && result.ok() && in_time;
    failed += !pass;
    std::printf("%s criterion %d: %s (%s; %.2f s%s)\n", pass ? "PASS" : "FAIL", cr.id, cr.name,
                threw ? ("exception: " + error).c_str() : result.summary().c_str(), secs,
                in_time ? "" : ", over the time limit");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
