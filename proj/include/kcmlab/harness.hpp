#pragma once

// Experiment orchestration: q-sweeps over the simulators, scaling fits of
// measured medians, and Monte Carlo up-arrow densities.

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmlab/bootstrap.hpp"
#include "kcmlab/droplets.hpp"
#include "kcmlab/exact.hpp"
#include "kcmlab/io.hpp"
#include "kcmlab/kcm.hpp"
#include "kcmlab/parallel.hpp"
#include "kcmlab/version.hpp"

namespace kcmlab {

// ---------------------------------------------------------------- fits

struct ScalingPoint {
  double q = 0.0;
  double time = 0.0;
  double censored_fraction = 0.0;
  bool censored = false;  // the median itself is censored
};

struct PredictorFit {
  std::string name;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct FitReport {
  std::vector<PredictorFit> fits;
  std::string winner;  // "indeterminate" when the best R^2 is below 0.5
  std::size_t points_used = 0;
  std::vector<double> excluded;  // q values left out
};

inline constexpr double kMaxCensoredFraction = 0.2;

inline const std::array<std::string, 4>& predictor_names() {
  static const std::array<std::string, 4> names{"(log q)^2", "1/q", "(log q)^2/q", "(log q)^4/q^2"};
  return names;
}

inline double predictor_value(std::size_t which, double q) {
  const double l2 = std::log(q) * std::log(q);
  switch (which) {
    case 0: return l2;
    case 1: return 1.0 / q;
    case 2: return l2 / q;
    default: return l2 * l2 / (q * q);
  }
}

/// Ordinary least squares of y on x.
inline PredictorFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  PredictorFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  // Relative threshold: constant data leaves only rounding noise in syy.
  f.r2 = syy > 1e-24 * std::max(1.0, my * my) * n ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 0.0;
  return f;
}

/// Fits log(time) against each predictor. Censored medians, cells more than
/// 20% censored and nonpositive times are excluded.
inline FitReport fit_scaling(const std::vector<ScalingPoint>& points) {
  FitReport out;
  std::vector<const ScalingPoint*> used;
  for (auto& p : points) {
    if (!(p.q > 0.0 && p.q < 1.0)) throw Error("q must lie in (0, 1)");
    if (p.censored || p.censored_fraction > kMaxCensoredFraction || !(p.time > 0.0) || !std::isfinite(p.time))
      out.excluded.push_back(p.q);
    else
      used.push_back(&p);
  }
  if (used.size() < 3)
    throw Error("fit needs at least 3 usable points, got " + std::to_string(used.size()));
  out.points_used = used.size();
  std::vector<double> y;
  for (auto* p : used) y.push_back(std::log(p->time));
  double best = -1.0;
  for (std::size_t k = 0; k < predictor_names().size(); ++k) {
    std::vector<double> x;
    for (auto* p : used) x.push_back(predictor_value(k, p->q));
    auto f = least_squares(x, y);
    f.name = predictor_names()[k];
    if (f.r2 > best) {
      best = f.r2;
      out.winner = f.name;
    }
    out.fits.push_back(std::move(f));
  }
  if (best < 0.5) out.winner = "indeterminate";
  return out;
}

inline const PredictorFit& fit_for(const FitReport& r, const std::string& name) {
  for (auto& f : r.fits)
    if (f.name == name) return f;
  throw Error("no predictor named " + name);
}

inline nlohmann::json to_json(const FitReport& r) {
  nlohmann::json fits = nlohmann::json::array();
  for (auto& f : r.fits) fits.push_back({{"predictor", f.name}, {"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}});
  return {{"fits", fits}, {"winner", r.winner}, {"points_used", r.points_used}, {"excluded_q", r.excluded}};
}

/// Reads `q time [censored_fraction [censored]]` rows; `#` lines are skipped.
inline std::vector<ScalingPoint> read_scaling_points(std::istream& is) {
  std::vector<ScalingPoint> out;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    ScalingPoint p;
    std::string time;
    if (!(ls >> p.q >> time)) throw Error("line " + std::to_string(n) + ": expected 'q time'");
    if (time == "censored" || time == "nan") {
      p.censored = true;
      p.time = std::numeric_limits<double>::quiet_NaN();
    } else {
      try {
        p.time = std::stod(time);
      } catch (...) {
        throw Error("line " + std::to_string(n) + ": bad time '" + time + "'");
      }
    }
    int c = 0;
    if (ls >> p.censored_fraction && ls >> c) p.censored = p.censored || c != 0;
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------- densities

struct Interval {
  double lo = 0.0, hi = 0.0;
};

/// Wilson score interval for k successes out of n.
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct DensityEstimate {
  double q = 0.0;
  std::size_t hits = 0;
  std::size_t trials = 0;
  double p_hat = 0.0;
  Interval ci;
};

/// Fraction of omega ~ mu whose arrow profile has an up arrow in columns
/// first_col..last_col.
inline DensityEstimate estimate_uparrow_density(double q, const ColumnGeometry& geometry, std::int64_t ell, int first_col,
                                                int last_col, std::size_t trials, std::uint64_t seed,
                                                std::uint64_t stream = 0) {
  if (!(q > 0.0 && q < 1.0)) throw Error("q must lie in (0, 1)");
  if (first_col < 1 || last_col > geometry.N() || first_col > last_col) throw Error("bad column range");
  if (trials < 1) throw Error("trials must be >= 1");
  const DropletAlgorithm algo(geometry, ell);
  std::vector<std::uint8_t> hit(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    RandomStream rng(seed, stream, t);
    auto p = algo.run(sample_omega(geometry, q, rng), last_col);
    for (int k = first_col; k <= last_col; ++k)
      if (p.is_up(k)) hit[t] = 1;
  });
  DensityEstimate d;
  d.q = q;
  d.trials = trials;
  for (auto h : hit) d.hits += h;
  d.p_hat = static_cast<double>(d.hits) / static_cast<double>(trials);
  d.ci = wilson_interval(d.hits, trials);
  return d;
}

struct DensityTrend {
  bool monotone = true;   // p_hat nonincreasing as q decreases
  bool separated = true;  // consecutive intervals disjoint
};

/// Trend across estimates ordered by decreasing q.
inline DensityTrend density_trend(const std::vector<DensityEstimate>& by_q) {
  DensityTrend t;
  for (std::size_t i = 1; i < by_q.size(); ++i) {
    if (by_q[i].q >= by_q[i - 1].q) throw Error("estimates must be ordered by decreasing q");
    if (by_q[i].p_hat > by_q[i - 1].p_hat) t.monotone = false;
    if (by_q[i].ci.hi >= by_q[i - 1].ci.lo) t.separated = false;
  }
  return t;
}

// ---------------------------------------------------------------- sweeps

enum class ExperimentKind { Kcm, Bootstrap, Exact };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Kcm: return "kcm";
    case ExperimentKind::Bootstrap: return "bootstrap";
    default: return "exact";
  }
}

inline ExperimentKind parse_kind(const std::string& s) {
  if (s == "kcm") return ExperimentKind::Kcm;
  if (s == "bootstrap") return ExperimentKind::Bootstrap;
  if (s == "exact") return ExperimentKind::Exact;
  throw Error("unknown experiment kind '" + s + "' (kcm, bootstrap, exact)");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Kcm;
  std::string family = "east1d";  // built-in name or path to a family JSON file
  std::vector<double> q;
  std::int64_t width = 64;  // kcm box
  std::int64_t height = 1;  // kcm box and exact strips
  std::int64_t box = 64;    // bootstrap half-width: region [-box, box]^2
  std::vector<std::int64_t> lengths;  // exact strip widths
  std::size_t trials = 100;
  double t_max = 1e6;
  std::uint64_t seed = 1;
  std::string output = "out";
  bool persistence = false;
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"kind", to_string(c.kind)}, {"family", c.family}, {"q", c.q},           {"width", c.width},
          {"height", c.height},        {"box", c.box},       {"lengths", c.lengths}, {"trials", c.trials},
          {"t_max", c.t_max},          {"seed", c.seed},     {"output", c.output},   {"persistence", c.persistence}};
}

/// Overlays the keys present in `j` onto `c`; unknown keys are errors.
inline void merge_config(ExperimentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  try {
    for (auto& [key, v] : j.items()) {
      if (key == "kind") c.kind = parse_kind(v.get<std::string>());
      else if (key == "family") c.family = v.get<std::string>();
      else if (key == "q") c.q = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      else if (key == "width") c.width = v.get<std::int64_t>();
      else if (key == "height") c.height = v.get<std::int64_t>();
      else if (key == "box") c.box = v.get<std::int64_t>();
      else if (key == "lengths") c.lengths = v.get<std::vector<std::int64_t>>();
      else if (key == "trials") c.trials = v.get<std::size_t>();
      else if (key == "t_max") c.t_max = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "output") c.output = v.get<std::string>();
      else if (key == "persistence") c.persistence = v.get<bool>();
      else throw Error("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  merge_config(c, j);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline UpdateFamily resolve_family(const std::string& name_or_path) {
  if (is_builtin_family(name_or_path)) return builtin_family(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw Error("family '" + name_or_path + "' is neither built in nor a readable file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_family(ss.str());
}

inline void validate(const ExperimentConfig& c) {
  if (c.q.empty()) throw Error("q list is empty");
  for (std::size_t i = 0; i < c.q.size(); ++i) {
    if (!(c.q[i] > 0.0 && c.q[i] < 1.0)) throw Error("q values must lie in (0, 1)");
    if (i > 0 && !(c.q[i] < c.q[i - 1])) throw Error("q values must be sorted strictly descending");
  }
  if (!is_builtin_family(c.family) && !std::filesystem::exists(c.family))
    throw Error("family file '" + c.family + "' does not exist");
  if (c.trials < 1) throw Error("trials must be >= 1");
  if (c.output.empty()) throw Error("output directory is empty");
  switch (c.kind) {
    case ExperimentKind::Kcm:
      if (c.width < 1 || c.height < 1) throw Error("box dimensions must be positive");
      if (!(c.t_max > 0.0)) throw Error("t_max must be positive");
      break;
    case ExperimentKind::Bootstrap:
      if (c.box < 1) throw Error("box must be >= 1");
      break;
    case ExperimentKind::Exact:
      if (c.lengths.empty()) throw Error("exact sweep needs a lengths list");
      for (auto L : c.lengths)
        if (L < 1 || L * c.height > static_cast<std::int64_t>(kMaxGeneratorSites))
          throw Error("exact strip " + std::to_string(L) + "x" + std::to_string(c.height) + " exceeds " +
                      std::to_string(kMaxGeneratorSites) + " sites");
      break;
  }
}

/// Short decimal form of q for file names: 0.3 -> "0.3".
inline std::string q_label(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", q);
  return buf;
}

struct CellResult {
  double q = 0.0;
  bool ok = false;
  std::string error;
  std::vector<std::string> files;
  std::optional<double> median;
  double censored_fraction = 0.0;
  nlohmann::json extra;
};

struct SweepResult {
  std::vector<CellResult> cells;
  std::filesystem::path manifest;
  double wall_seconds = 0.0;
  bool ok() const {
    for (auto& c : cells)
      if (!c.ok) return false;
    return true;
  }
  std::vector<ScalingPoint> scaling_points() const {
    std::vector<ScalingPoint> out;
    for (auto& c : cells)
      if (c.ok && c.extra.is_null())
        out.push_back({c.q, c.median.value_or(std::numeric_limits<double>::quiet_NaN()), c.censored_fraction,
                       !c.median.has_value()});
    return out;
  }
};

namespace detail {

inline CellResult run_cell(const ExperimentConfig& c, const UpdateFamily& family, double q,
                           const std::filesystem::path& dir) {
  CellResult cell;
  cell.q = q;
  const auto tag = q_label(q);
  switch (c.kind) {
    case ExperimentKind::Kcm: {
      auto b = default_box(family, c.width, c.height);
      SimParams p{family, q, b.region, b.exterior, c.t_max, c.seed, 0};
      auto r = batch_tau0(p, c.trials, c.persistence ? StopRule::Persistence : StopRule::Tau0);
      std::ostringstream os;
      write_kcm_csv(os, p, r.samples);
      const auto name = "kcm_q" + tag + ".csv";
      write_file_atomic(dir / name, os.str());
      cell.files.push_back(name);
      cell.median = r.summary.median;
      cell.censored_fraction = r.summary.censor_fraction;
      break;
    }
    case ExperimentKind::Bootstrap: {
      const auto stream = std::bit_cast<std::uint64_t>(q);
      auto r = median_bootstrap_time(family, q, c.box, c.trials, c.seed, stream);
      std::ostringstream os;
      os << csv_banner(c.seed) << "\ntrial,seed,q,time,censored\n";
      for (std::size_t t = 0; t < r.samples.size(); ++t)
        os << t << ',' << c.seed << ',' << format_double(q) << ','
           << (r.samples[t] ? std::to_string(*r.samples[t]) : std::string()) << ',' << (r.samples[t] ? 0 : 1) << '\n';
      const auto name = "bootstrap_q" + tag + ".csv";
      write_file_atomic(dir / name, os.str());
      cell.files.push_back(name);
      if (r.median) cell.median = static_cast<double>(*r.median);
      cell.censored_fraction = static_cast<double>(r.censored) / static_cast<double>(c.trials);
      break;
    }
    case ExperimentKind::Exact: {
      std::ostringstream csv;
      csv << csv_banner(c.seed) << "\nL,q,gap,t_rel,e_mu_tau0,ratio_check\n";
      nlohmann::json gaps = nlohmann::json::array();
      for (auto L : c.lengths) {
        auto b = default_box(family, L, c.height);
        auto report = exact_report(build_generator(family, b.region, b.exterior, q));
        auto j = to_json(report);
        j["L"] = L;
        j["q"] = q;
        j["family"] = family.name();
        const auto name = "exact_L" + std::to_string(L) + "_q" + tag + ".json";
        write_file_atomic(dir / name, j.dump(2) + "\n");
        cell.files.push_back(name);
        csv << L << ',' << format_double(q) << ',' << format_double(report.gap.gap) << ','
            << format_double(report.gap.t_rel) << ',' << format_double(report.hitting.e_mu_tau0) << ','
            << (report.ratio_check ? 1 : 0) << '\n';
        gaps.push_back({{"L", L}, {"gap", report.gap.gap}, {"t_rel", report.gap.t_rel}});
      }
      const auto name = "exact_q" + tag + ".csv";
      write_file_atomic(dir / name, csv.str());
      cell.files.push_back(name);
      cell.extra = {{"gaps", gaps}};
      break;
    }
  }
  cell.ok = true;
  return cell;
}

}  // namespace detail

/// Runs every q cell (in parallel), writes one output per cell, then a
/// two-column medians.dat and, last, manifest.json. A failing cell is
/// recorded in the manifest and does not stop the others.
inline SweepResult run_sweep(const ExperimentConfig& c) {
  validate(c);
  const auto start = std::chrono::steady_clock::now();
  const auto family = resolve_family(c.family);
  const std::filesystem::path dir(c.output);
  std::filesystem::create_directories(dir);
  SweepResult out;
  out.cells.resize(c.q.size());
  parallel_for(c.q.size(), [&](std::size_t i) {
    try {
      out.cells[i] = detail::run_cell(c, family, c.q[i], dir);
    } catch (const std::exception& e) {
      out.cells[i] = CellResult{};
      out.cells[i].q = c.q[i];
      out.cells[i].error = e.what();
    }
  });
  std::ostringstream dat;
  dat << csv_banner(c.seed) << "\n";
  if (c.kind == ExperimentKind::Exact) {
    dat << "# L t_rel per q block\n";
    for (auto& cell : out.cells) {
      if (!cell.ok) continue;
      dat << "# q=" << q_label(cell.q) << "\n";
      for (auto& g : cell.extra["gaps"]) dat << g["L"].get<std::int64_t>() << ' ' << format_double(g["t_rel"]) << '\n';
      dat << "\n\n";
    }
  } else {
    dat << "# q median\n";
    for (auto& cell : out.cells)
      if (cell.ok && cell.median) dat << format_double(cell.q) << ' ' << format_double(*cell.median) << '\n';
  }
  write_file_atomic(dir / "medians.dat", dat.str());

  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json cells = nlohmann::json::array();
  for (auto& cell : out.cells) {
    nlohmann::json j{{"q", cell.q}, {"status", cell.ok ? "ok" : "failed"}, {"files", cell.files}};
    if (!cell.ok) j["error"] = cell.error;
    if (c.kind != ExperimentKind::Exact && cell.ok) {
      j["median"] = cell.median ? nlohmann::json(*cell.median) : nlohmann::json(nullptr);
      j["censored_fraction"] = cell.censored_fraction;
    }
    cells.push_back(std::move(j));
  }
  nlohmann::json manifest{{"version", kVersion},
                          {"seed", c.seed},
                          {"config", to_json(c)},
                          {"cells", cells},
                          {"status", out.ok() ? "ok" : "partial"},
                          {"wall_clock_seconds", out.wall_seconds}};
  out.manifest = dir / "manifest.json";
  write_file_atomic(out.manifest, manifest.dump(2) + "\n");
  return out;
}

}  // namespace kcmlab
