// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <unistd.h>

#include "droplet_checks.hpp"
#include "kcmlab/kcmlab.hpp"

using namespace kcmlab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string outcome_text(const checks::Outcome& o) {
  std::string s = std::to_string(o.instances) + " instances, " + std::to_string(o.failures) + " failures";
  if (!o.first_failure.empty()) s += " (" + o.first_failure + ")";
  return s;
}

Verdict timed_outcome(const std::function<checks::Outcome()>& run, double limit) {
  const auto t0 = std::chrono::steady_clock::now();
  auto o = run();
  const double t = seconds_since(t0);
  return {o.ok() && t < limit, outcome_text(o) + ", " + fmt(t, 3) + " s (limit " + fmt(limit) + " s)"};
}

Verdict closure_equivalence() {
  return timed_outcome([] { return checks::closure_oracle(101, 1000); }, 30);
}

Verdict screening() {
  return timed_outcome([] { return checks::screening(102, 500); }, 60);
}

Verdict monotonicity() {
  const auto t0 = std::chrono::steady_clock::now();
  auto a = checks::monotonicity_a(103, 500);
  auto b = checks::monotonicity_b(104, 500);
  auto c = checks::monotonicity_c(105, 500);
  const double t = seconds_since(t0);
  return {a.ok() && b.ok() && c.ok() && t < 60,
          "(A) " + outcome_text(a) + "; (B) " + outcome_text(b) + "; (C) " + outcome_text(c) + ", " + fmt(t, 3) + " s"};
}

Verdict propagation() {
  auto o = checks::propagation(106, 200);
  return {o.ok(), outcome_text(o)};
}

Verdict east_barrier_law() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string got;
  bool ok = true;
  for (int ell = 1; ell <= 12; ++ell) {
    const int expect = static_cast<int>(std::ceil(std::log2(ell + 1.0) - 1e-12));
    const int b = east_barrier(ell).barrier;
    got += (ell > 1 ? " " : "") + std::to_string(b);
    if (b != expect) ok = false;
  }
  const double t = seconds_since(t0);
  return {ok && t < 60, "barriers " + got + ", " + fmt(t, 3) + " s"};
}

Verdict droplet_properties() {
  auto structure = checks::droplet_structure(107, 200);
  auto a = checks::east_like_a(108, 500);
  auto b = checks::east_like_b(109, 200);
  auto r = checks::range_implies_b2(110, 200);
  const bool ok = structure.ok() && a.ok() && b.outcome.ok() && b.qualifying >= 20 && r.outcome.ok();
  return {ok, "disjointness+restriction: " + outcome_text(structure) + "; motion (a): " + outcome_text(a) +
                  "; motion (b): " + std::to_string(b.qualifying) + " qualifying, " + outcome_text(b.outcome) +
                  "; range=>B2: " + std::to_string(r.qualifying) + " qualifying, " + outcome_text(r.outcome)};
}

Verdict exact_vs_monte_carlo() {
  auto b = default_box(east1d(), 8, 1);
  auto exact = mean_hitting(build_generator(east1d(), b.region, b.exterior, 0.4)).e_mu_tau0;
  SimParams p{east1d(), 0.4, b.region, b.exterior, 1e6, 2024, 0};
  auto mc = batch_tau0(p, 10000).summary;
  const double z = std::abs(mc.mean - exact) / mc.std_error;
  bool ok = mc.censor_fraction == 0.0 && z <= 3.0;
  std::string detail = "mean " + fmt(mc.mean, 6) + " vs exact " + fmt(exact, 6) + " (" + fmt(z, 3) + " SE)";

  std::size_t instances = 0, violations = 0;
  std::string first;
  auto check = [&](const UpdateFamily& f, std::int64_t w, std::int64_t h, double q) {
    auto bb = default_box(f, w, h);
    auto gen = build_generator(f, bb.region, bb.exterior, q);
    auto r = exact_report(gen);
    ++instances;
    if (!(q * r.hitting.e_mu_tau0 <= r.gap.t_rel)) {
      if (violations++ == 0) first = f.name() + " " + std::to_string(w) + "x" + std::to_string(h) + " q=" + fmt(q);
    }
  };
  for (double q : {0.1, 0.2, 0.3, 0.4, 0.5, 0.7}) {
    for (std::int64_t L = 1; L <= 12; ++L) check(east1d(), L, 1, q);
    for (auto [w, h] : {std::pair{2, 2}, {3, 3}, {4, 3}, {2, 6}}) check(east2d(), w, h, q);
    for (auto [w, h] : {std::pair{1, 3}, {3, 3}, {4, 3}, {2, 5}}) check(duarte(), w, h, q);
  }
  ok = ok && violations == 0;
  detail += "; ratio check on " + std::to_string(instances) + " exact instances, " + std::to_string(violations) +
            " violations" + (first.empty() ? "" : " (" + first + ")");
  return {ok, detail};
}

Verdict proxy() {
  bool ok = true;
  std::string detail;
  for (double q : {0.2, 0.3}) {
    auto b = default_box(east1d(), 8, 1);
    auto gen = build_generator(east1d(), b.region, b.exterior, q);
    auto r = check_proxy_bound(gen, no_empties_indicator(gen));
    ok = ok && r.at_t_star.holds && r.all_hold && r.grid.size() == 20;
    detail += (detail.empty() ? "" : "; ") + std::string("q=") + fmt(q) + ": bound(T*) " + fmt(r.at_t_star.bound, 6) +
              " <= " + fmt(r.e_mu_tau0, 6) + ", grid " + (r.all_hold ? "holds" : "violated");
  }
  return {ok, detail};
}

Verdict scaling_trends() {
  const auto dir = fs::temp_directory_path() / ("kcmlab_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  std::string detail;

  ExperimentConfig east;
  east.kind = ExperimentKind::Kcm;
  east.family = "east1d";
  east.q = {0.5, 0.4, 0.3, 0.25, 0.2, 0.15};
  east.width = 256;
  east.height = 1;
  east.trials = 500;
  east.t_max = 1e7;
  east.seed = 7;
  east.output = (dir / "east").string();
  auto t0 = std::chrono::steady_clock::now();
  auto er = run_sweep(east);
  const double te = seconds_since(t0);
  bool a = er.ok() && te <= 600;
  detail += "(a) medians";
  for (auto& c : er.cells) detail += " " + (c.median ? fmt(*c.median, 4) : std::string("censored"));
  try {
    auto fit = fit_scaling(er.scaling_points());
    const double margin = fit_for(fit, "(log q)^2").r2 - fit_for(fit, "1/q").r2;
    a = a && fit.winner == "(log q)^2" && margin >= 0.05;
    detail += ", winner " + fit.winner + ", R2 (log q)^2 " + fmt(fit_for(fit, "(log q)^2").r2) + " vs 1/q " +
              fmt(fit_for(fit, "1/q").r2) + " (margin " + fmt(margin, 3) + ", need >= 0.05)";
    for (double q : fit.excluded) detail += ", excluded q=" + fmt(q);
  } catch (const std::exception& e) {
    a = false;
    detail += std::string(", fit failed: ") + e.what();
  }
  detail += ", " + fmt(te, 3) + " s";

  ExperimentConfig dua;
  dua.kind = ExperimentKind::Bootstrap;
  dua.family = "duarte";
  dua.q = {0.35, 0.3, 0.25, 0.2};
  dua.box = 512;
  dua.trials = 200;
  dua.seed = 7;
  dua.output = (dir / "duarte").string();
  t0 = std::chrono::steady_clock::now();
  auto dr = run_sweep(dua);
  const double td = seconds_since(t0);
  bool b = dr.ok() && td <= 900;
  detail += "; (b) medians";
  for (std::size_t i = 0; i < dr.cells.size(); ++i) {
    auto& c = dr.cells[i];
    detail += " " + (c.median ? fmt(*c.median) : std::string("censored"));
    if (!c.median || (i > 0 && !(dr.cells[i - 1].median && *c.median > *dr.cells[i - 1].median))) b = false;
  }
  try {
    auto fit = fit_scaling(dr.scaling_points());
    detail += ", advisory R2 vs (log q)^2/q " + fmt(fit_for(fit, "(log q)^2/q").r2) + " (target 0.9)";
  } catch (const std::exception& e) {
    detail += std::string(", advisory fit failed: ") + e.what();
  }
  detail += ", " + fmt(td, 3) + " s";
  fs::remove_all(dir);
  detail = std::string("(a) ") + (a ? "pass" : "FAIL") + ", (b) " + (b ? "pass" : "FAIL") + ": " + detail;
  return {a && b, detail};
}

Verdict classification() {
  const UpdateFamily two("two-stable", {{{-1, 0}}, {{0, -1}}, {{1, 0}, {0, 1}}});
  auto rep = stable_directions(two);
  const bool stable_exact = rep.arcs.size() == 2 && !rep.full_circle && rep.arcs[0].is_point() &&
                            rep.arcs[1].is_point() && rep.arcs[0].from == Direction{-1, 0} &&
                            rep.arcs[1].from == Direction{0, -1};
  const auto ce = classify_family(east2d()), ct = classify_family(two), cd = classify_family(duarte());
  const bool ok = ce == Classification::SupercriticalRooted && ct == Classification::SupercriticalRooted &&
                  cd == Classification::NotSupercritical && stable_exact;
  std::string arcs;
  for (auto& a : rep.arcs) arcs += (arcs.empty() ? "" : ",") + to_string(a.from) + (a.is_point() ? "" : ".." + to_string(a.to));
  return {ok, "east2d " + to_string(ce) + ", two-stable " + to_string(ct) + " {" + arcs + "}, duarte " + to_string(cd)};
}

/// All configurations of Lambda_n with at most n-1 empties, joined by legal
/// flips read from coordinates; union-find over the edges.
struct BruteForce {
  bool origin_reachable = false;
  std::size_t component = 0;
  std::size_t states = 0;
};

BruteForce brute_force_reach(const UpdateFamily& f, int n, int kappa) {
  const auto side = kappa * n * (1 << n) + 1;
  const auto region = Region::square((side - 1) / 2);
  const auto size = region.size();
  const std::size_t cap = static_cast<std::size_t>(n - 1);
  std::vector<std::vector<std::size_t>> states{{}};
  std::function<void(std::vector<std::size_t>&, std::size_t)> extend = [&](std::vector<std::size_t>& cur,
                                                                           std::size_t from) {
    if (cur.size() == cap) return;
    for (std::size_t i = from; i < size; ++i) {
      cur.push_back(i);
      states.push_back(cur);
      extend(cur, i + 1);
      cur.pop_back();
    }
  };
  std::vector<std::size_t> cur;
  extend(cur, 0);
  std::map<std::vector<std::size_t>, std::size_t> id;
  for (std::size_t k = 0; k < states.size(); ++k) id[states[k]] = k;
  std::vector<std::size_t> parent(states.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
    return parent[a] == a ? a : parent[a] = find(parent[a]);
  };
  for (std::size_t k = 0; k < states.size(); ++k) {
    std::vector<std::uint8_t> bits(size, 1);
    for (auto i : states[k]) bits[i] = 0;
    const Configuration cfg(region, bits, AllInfected{});
    for (std::size_t i = 0; i < size; ++i) {
      if (!constraint_satisfied(cfg, f, region.site(i))) continue;
      auto next = states[k];
      auto it = std::find(next.begin(), next.end(), i);
      if (it != next.end())
        next.erase(it);
      else
        next.insert(std::upper_bound(next.begin(), next.end(), i), i);
      auto found = id.find(next);
      if (found == id.end()) continue;  // would exceed the cap
      parent[find(k)] = find(found->second);
    }
  }
  BruteForce out;
  out.states = states.size();
  const auto origin = static_cast<std::size_t>(region.index_of(kOrigin));
  const auto root = find(0);
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (find(k) != root) continue;
    ++out.component;
    if (std::find(states[k].begin(), states[k].end(), origin) != states[k].end()) out.origin_reachable = true;
  }
  return out;
}

Verdict reachability() {
  bool ok = true;
  std::string detail;
  for (int n : {1, 2}) {
    auto fast = an_reachability(east2d(), n, 1);
    auto slow = brute_force_reach(east2d(), n, 1);
    ok = ok && fast.origin_infectable == slow.origin_reachable && fast.reachable_states == slow.component;
    detail += (detail.empty() ? "" : "; ") + std::string("n=") + std::to_string(n) + ": verdict " +
              (fast.origin_infectable ? "reachable" : "unreachable") + " vs " +
              (slow.origin_reachable ? "reachable" : "unreachable") + ", states " +
              std::to_string(fast.reachable_states) + " vs " + std::to_string(slow.component) + " of " +
              std::to_string(slow.states);
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"closure queue vs synchronous oracle", closure_equivalence},
      {"staircase screening", screening},
      {"boundary and region monotonicity", monotonicity},
      {"Duarte path propagation", propagation},
      {"East energy barrier", east_barrier_law},
      {"droplet properties at toy scale", droplet_properties},
      {"exact vs Monte Carlo and ratio check", exact_vs_monte_carlo},
      {"proxy lower bound", proxy},
      {"scaling trends", scaling_trends},
      {"classification", classification},
      {"reachability vs brute force", reachability},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!only.empty() && !only.count(k + 1)) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << (k + 1) << " " << criteria[k].first << ": " << v.detail
              << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
