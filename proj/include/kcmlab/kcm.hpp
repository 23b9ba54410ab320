#pragma once

// Continuous-time KCM dynamics by rejection: the superposition of unit-rate
// site clocks is one clock of rate |region| whose rings land on a uniform
// site. A ring at a site with its constraint satisfied resamples it
// (empty w.p. q); other rings are no-ops.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>

#include "kcmlab/constraints.hpp"
#include "kcmlab/parallel.hpp"
#include "kcmlab/rng.hpp"
#include "kcmlab/version.hpp"

namespace kcmlab {

/// Stream id reserved for KCM trajectories.
inline constexpr std::uint64_t kKcmStream = 0x6b636d;

struct SimParams {
  UpdateFamily family = east1d();
  double q = 0.5;
  Region region = Region({kOrigin});
  Exterior boundary = AllHealthy{};
  double t_max = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
};

struct HittingResult {
  double tau0 = 0.0;  // equals t_max when censored
  bool censored = false;
  std::uint64_t events = 0;
  std::uint64_t legal_updates = 0;
};

/// Box of width x height sites whose rightmost column contains the origin.
/// East2d puts the origin in the top-right corner; other families centre it
/// vertically. The exterior freezes the whole boundary empty, which for the
/// built-in families means the left wall, plus bottom (East2d) or top and
/// bottom (Duarte).
struct Box {
  Region region;
  Exterior exterior;
};

inline Box default_box(const UpdateFamily& family, std::int64_t width, std::int64_t height) {
  if (width < 1 || height < 1) throw Error("box dimensions must be positive");
  std::int64_t y0 = family == east2d() ? -(height - 1) : -((height - 1) / 2);
  auto region = Region::rectangle(-(width - 1), y0, width, height);
  auto tau = BoundaryCondition::uniform(region, 0);
  return {std::move(region), Exterior{std::move(tau)}};
}

/// Compiled dynamics on one region; shareable read-only across trials.
class KcmModel {
 public:
  KcmModel(const UpdateFamily& family, const Region& region, const Exterior& exterior)
      : table_(std::make_shared<ConstraintTable>(family, region, exterior)) {
    auto o = region.index_of(kOrigin);
    origin_ = o == Region::npos ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(o));
  }

  const ConstraintTable& table() const { return *table_; }
  const Region& region() const { return table_->region(); }
  std::size_t size() const { return table_->size(); }
  std::optional<std::size_t> origin() const { return origin_; }

 private:
  std::shared_ptr<const ConstraintTable> table_;
  std::optional<std::size_t> origin_;
};

struct Ring {
  double time;
  std::size_t site;
  bool legal;
  std::uint8_t after;
};

/// One trajectory. The stream is (seed, kKcmStream, trial); the initial state
/// is drawn from it first (stationary start) unless given explicitly.
class KcmChain {
 public:
  KcmChain(const KcmModel& model, double q, std::uint64_t seed, std::uint64_t trial)
      : model_(&model), q_(q), rng_(seed, kKcmStream, trial) {
    check_q(q);
    state_ = sample_bits(model.size(), q, rng_);
  }

  KcmChain(const KcmModel& model, double q, std::uint64_t seed, std::uint64_t trial, std::vector<std::uint8_t> initial)
      : model_(&model), q_(q), rng_(seed, kKcmStream, trial), state_(std::move(initial)) {
    check_q(q);
    if (state_.size() != model.size()) throw Error("initial state size differs from region size");
  }

  /// Next ring if it happens no later than t_limit; otherwise time moves to
  /// t_limit and nothing changes. Every ring draws exactly the same random
  /// numbers (time, site, resample), legal or not.
  std::optional<Ring> next(double t_limit) {
    const auto n = static_cast<double>(state_.size());
    const double dt = rng_.exponential(n);
    const auto site = static_cast<std::size_t>(rng_.below(state_.size()));
    const bool empty = rng_.bernoulli(q_);
    if (time_ + dt > t_limit) {
      time_ = t_limit;
      return std::nullopt;
    }
    time_ += dt;
    ++events_;
    Ring ring{time_, site, model_->table().satisfied(site, state_), state_[site]};
    if (ring.legal) {
      ++legal_;
      state_[site] = empty ? 0 : 1;
      ring.after = state_[site];
    }
    return ring;
  }

  /// Runs until time t (no stopping rule).
  void run_until(double t) {
    while (next(t)) {
    }
  }

  double time() const { return time_; }
  const std::vector<std::uint8_t>& state() const { return state_; }
  std::uint64_t events() const { return events_; }
  std::uint64_t legal_updates() const { return legal_; }

 private:
  static void check_q(double q) {
    if (!(q > 0.0 && q < 1.0)) throw Error("q must lie in (0, 1)");
  }

  const KcmModel* model_;
  double q_;
  RandomStream rng_;
  std::vector<std::uint8_t> state_;
  double time_ = 0.0;
  std::uint64_t events_ = 0, legal_ = 0;
};

enum class StopRule { Tau0, Persistence };

inline HittingResult simulate(const KcmModel& model, double q, double t_max, std::uint64_t seed, std::uint64_t trial,
                              StopRule rule) {
  if (!(t_max > 0.0)) throw Error("t_max must be positive");
  if (!model.origin()) throw Error("origin not in region");
  const auto origin = *model.origin();
  KcmChain chain(model, q, seed, trial);
  HittingResult r;
  if (rule == StopRule::Tau0 && chain.state()[origin] == 0) return r;
  while (auto ring = chain.next(t_max)) {
    if (ring->site != origin || !ring->legal) continue;
    if (rule == StopRule::Persistence || ring->after == 0) {
      r.tau0 = ring->time;
      r.events = chain.events();
      r.legal_updates = chain.legal_updates();
      return r;
    }
  }
  r.tau0 = t_max;
  r.censored = true;
  r.events = chain.events();
  r.legal_updates = chain.legal_updates();
  return r;
}

inline void validate(const SimParams& p) {
  if (!(p.q > 0.0 && p.q < 1.0)) throw Error("q must lie in (0, 1)");
  if (!(p.t_max > 0.0)) throw Error("t_max must be positive");
  if (!p.region.contains(kOrigin)) throw Error("origin not in region");
}

/// First time the origin is empty; 0 if it starts empty.
inline HittingResult simulate_tau0(const SimParams& p) {
  validate(p);
  return simulate(KcmModel(p.family, p.region, p.boundary), p.q, p.t_max, p.seed, p.trial, StopRule::Tau0);
}

/// First legal update at the origin.
inline HittingResult simulate_persistence(const SimParams& p) {
  validate(p);
  return simulate(KcmModel(p.family, p.region, p.boundary), p.q, p.t_max, p.seed, p.trial, StopRule::Persistence);
}

struct BatchSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();  // over uncensored samples
  double std_error = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> median;  // censored samples sort last; nullopt = censored
  double censor_fraction = 0.0;
  std::size_t uncensored = 0;
};

struct BatchResult {
  std::vector<HittingResult> samples;  // trial order
  BatchSummary summary;
};

inline BatchSummary summarize(const std::vector<HittingResult>& samples) {
  BatchSummary s;
  if (samples.empty()) return s;
  std::vector<double> ok;
  for (auto& r : samples)
    if (!r.censored) ok.push_back(r.tau0);
  s.uncensored = ok.size();
  s.censor_fraction = 1.0 - static_cast<double>(ok.size()) / static_cast<double>(samples.size());
  if (!ok.empty()) {
    double sum = 0.0;
    for (double v : ok) sum += v;
    s.mean = sum / static_cast<double>(ok.size());
    if (ok.size() > 1) {
      double ss = 0.0;
      for (double v : ok) ss += (v - s.mean) * (v - s.mean);
      s.std_error = std::sqrt(ss / static_cast<double>(ok.size() - 1) / static_cast<double>(ok.size()));
    } else {
      s.std_error = 0.0;
    }
  }
  std::sort(ok.begin(), ok.end());
  const auto mid = (samples.size() - 1) / 2;
  if (mid < ok.size()) s.median = ok[mid];
  return s;
}

/// Independent trials 0..trials-1 of one parameter set, run in parallel and
/// returned in trial order.
inline BatchResult batch_tau0(const SimParams& p, std::size_t trials, StopRule rule = StopRule::Tau0) {
  validate(p);
  if (trials < 1) throw Error("trials must be >= 1");
  const KcmModel model(p.family, p.region, p.boundary);
  BatchResult out;
  out.samples.resize(trials);
  parallel_for(trials, [&](std::size_t t) {
    out.samples[t] = simulate(model, p.q, p.t_max, p.seed, p.trial + t, rule);
  });
  out.summary = summarize(out.samples);
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// CSV with the banner line and header `trial,seed,q,tau0,censored,events,legal_updates`.
inline void write_kcm_csv(std::ostream& os, const SimParams& p, const std::vector<HittingResult>& samples) {
  os << csv_banner(p.seed) << "\n";
  os << "trial,seed,q,tau0,censored,events,legal_updates\n";
  for (std::size_t t = 0; t < samples.size(); ++t) {
    const auto& r = samples[t];
    os << (p.trial + t) << ',' << p.seed << ',' << format_double(p.q) << ',' << format_double(r.tau0) << ','
       << (r.censored ? 1 : 0) << ',' << r.events << ',' << r.legal_updates << '\n';
  }
}

}  // namespace kcmlab
