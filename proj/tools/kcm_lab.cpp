// kcm_lab: command-line front end for the kcmlab library.
//
// Every option can also come from a JSON file given with --config. Top-level
// scalar keys apply to the subcommand being run; an object keyed by a
// subcommand name applies only to that subcommand. Flags on the command line
// override the file.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "kcmlab/kcmlab.hpp"

using namespace kcmlab;
using nlohmann::json;

namespace {

class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string active) : active_(std::move(active)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      doc = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        for (auto& [k, v] : value.items()) items.push_back(item({key}, k, v));
      } else if (!active_.empty()) {
        items.push_back(item({active_}, key, value));
      }
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const json& v) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    if (v.is_array())
      for (auto& e : v) it.inputs.push_back(scalar(e));
    else
      it.inputs.push_back(scalar(v));
    return it;
  }

  std::string active_;
};

struct BoxSize {
  std::int64_t width = 0, height = 0;
};

BoxSize parse_box(const std::string& s) {
  auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) {
      auto w = std::stoll(s);
      return {w, 1};
    }
    return {std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw Error("box must look like WxH, got '" + s + "'");
  }
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_file_atomic(output, text);
  }
}

std::string active_subcommand(int argc, char** argv, const std::vector<std::string>& names) {
  for (int i = 1; i < argc; ++i)
    for (auto& n : names)
      if (n == argv[i]) return n;
  return {};
}

json arcs_json(const StableDirectionReport& r) {
  json arcs = json::array();
  for (auto& a : r.arcs) arcs.push_back({{"from", to_string(a.from)}, {"to", to_string(a.to)}});
  return arcs;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> names{"classify", "bootstrap-close", "bootstrap-time", "kcm-run", "exact",
                                       "east-barrier", "an-reach", "duarte-phi", "sweep", "fit"};
  CLI::App app{"Bootstrap percolation and kinetically constrained model lab"};
  app.config_formatter(std::make_shared<JsonConfig>(active_subcommand(argc, argv, names)));
  app.set_config("--config", "", "JSON file with option values");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string family = "east1d", output, input, box_text = "64x1";
  double q = 0.3, t_max = 1e6;
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  std::int64_t box = 64, cap = 256, ell = 3, n_cols = 4, kappa = 1, b1_n = 1, b2_n = 2;
  int n = 1, tau = 1;
  bool persistence = false;

  auto* classify = app.add_subcommand("classify", "stable directions and classification of a family");
  classify->add_option("--family", family, "built-in name or JSON file")->required();

  auto* bclose = app.add_subcommand("bootstrap-close", "closure of an infected set read as x,y CSV");
  bclose->add_option("--family", family)->required();
  bclose->add_option("--input", input, "infected sites, x,y per line")->required()->check(CLI::ExistingFile);
  bclose->add_option("--box", box, "finite volume [-B,B]^2 with uniform boundary --tau; 0 = free closure")
      ->capture_default_str();
  bclose->add_option("--tau", tau, "boundary value for --box (0 infected, 1 healthy)")
      ->check(CLI::Range(0, 1))
      ->capture_default_str();
  bclose->add_option("--cap", cap, "window radius cap for the free closure")->capture_default_str();
  bclose->add_option("--seed", seed, "recorded in the CSV header")->capture_default_str();
  bclose->add_option("--output", output, "CSV path (default stdout)");

  auto* btime = app.add_subcommand("bootstrap-time", "median first infection time of the origin");
  btime->add_option("--family", family)->required();
  btime->add_option("--q", q)->required();
  btime->add_option("--box", box, "half-width B of [-B,B]^2")->required();
  btime->add_option("--trials", trials)->capture_default_str();
  btime->add_option("--seed", seed)->capture_default_str();
  btime->add_option("--output", output, "per-trial CSV path");

  auto* krun = app.add_subcommand("kcm-run", "tau0 or persistence samples of the KCM");
  krun->add_option("--family", family)->required();
  krun->add_option("--q", q)->required();
  krun->add_option("--box", box_text, "WxH, origin in the right column")->capture_default_str();
  krun->add_option("--trials", trials)->capture_default_str();
  krun->add_option("--tmax,--t_max", t_max)->capture_default_str();
  krun->add_option("--seed", seed)->capture_default_str();
  krun->add_flag("--persistence", persistence, "stop at the first legal update at the origin");
  krun->add_option("--output", output, "CSV path (default stdout)");

  auto* exact = app.add_subcommand("exact", "spectral gap and mean hitting time on a small box");
  exact->add_option("--family", family)->required();
  exact->add_option("--box", box_text, "WxH, at most 14 sites")->required();
  exact->add_option("--q", q)->required();
  exact->add_option("--output", output, "JSON path (default stdout)");

  auto* barrier = app.add_subcommand("east-barrier", "energy barrier of the East chain");
  barrier->add_option("--ell", ell)->required()->check(CLI::Range(1, 62));

  auto* reach = app.add_subcommand("an-reach", "can the origin be emptied with at most n-1 empties");
  reach->add_option("--family", family)->required();
  reach->add_option("--n", n)->required()->check(CLI::Range(1, 5));
  reach->add_option("--kappa", kappa)->capture_default_str();

  auto* phi = app.add_subcommand("duarte-phi", "arrow profile of the droplet algorithm");
  phi->add_option("--q", q, "empty density when sampling")->capture_default_str();
  phi->add_option("--N", n_cols, "number of columns")->required();
  phi->add_option("--ell", ell, "interval length")->required();
  auto* phi_seed = phi->add_option("--seed", seed, "sample omega from this seed");
  phi->add_option("--input", input, "empty sites of V as x,y CSV")->check(CLI::ExistingFile)->excludes(phi_seed);
  phi->add_option("--b1", b1_n, "threshold for B1")->capture_default_str();
  phi->add_option("--b2", b2_n, "threshold for B2")->capture_default_str();
  phi->add_option("--output", output, "JSON path (default stdout)");

  ExperimentConfig sc;
  std::string kind = "kcm";
  auto* sweep = app.add_subcommand("sweep", "q-sweep writing one output per q and a manifest");
  sweep->add_option("--kind", kind, "kcm, bootstrap or exact")->capture_default_str();
  sweep->add_option("--family", sc.family)->capture_default_str();
  sweep->add_option("--q", sc.q, "q values, strictly descending")->required();
  sweep->add_option("--width", sc.width)->capture_default_str();
  sweep->add_option("--height", sc.height)->capture_default_str();
  sweep->add_option("--box", sc.box)->capture_default_str();
  sweep->add_option("--lengths", sc.lengths, "exact strip widths");
  sweep->add_option("--trials", sc.trials)->capture_default_str();
  sweep->add_option("--tmax,--t_max", sc.t_max)->capture_default_str();
  sweep->add_option("--seed", sc.seed)->capture_default_str();
  sweep->add_option("--output", sc.output, "output directory")->capture_default_str();
  sweep->add_flag("--persistence", sc.persistence);

  auto* fit = app.add_subcommand("fit", "fit log(median) against the scaling predictors");
  fit->add_option("--input", input, "rows 'q time [censored_fraction [censored]]'")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*classify) {
      auto f = resolve_family(family);
      auto r = stable_directions(f);
      json notes = r.notes;
      std::cout << json{{"family", f.name()},
                        {"classification", to_string(classify_family(f))},
                        {"full_circle", r.full_circle},
                        {"stable_arcs", arcs_json(r)},
                        {"notes", notes}}
                       .dump(2)
                << "\n";
    } else if (*bclose) {
      auto f = resolve_family(family);
      auto seeds = read_sites_csv(std::filesystem::path(input));
      ClosureResult r;
      if (box > 0) {
        auto region = Region::square(box);
        r = closure_region(f, region, BoundaryCondition::uniform(region, static_cast<std::uint8_t>(tau)), seeds);
      } else {
        r = closure_free(f, seeds, cap);
      }
      std::ostringstream os;
      write_sites_csv(os, r.closed, seed);
      emit(os.str(), output);
      std::cerr << "sites=" << r.closed.size() << " rounds=" << r.rounds << " touched_cap=" << r.touched_cap << "\n";
    } else if (*btime) {
      auto f = resolve_family(family);
      auto r = median_bootstrap_time(f, q, box, trials, seed, std::bit_cast<std::uint64_t>(q));
      auto val = [](const InfectionTime& t) { return t ? json(*t) : json(nullptr); };
      if (!output.empty()) {
        std::ostringstream os;
        os << csv_banner(seed) << "\ntrial,seed,q,time,censored\n";
        for (std::size_t t = 0; t < r.samples.size(); ++t)
          os << t << ',' << seed << ',' << format_double(q) << ','
             << (r.samples[t] ? std::to_string(*r.samples[t]) : std::string()) << ',' << (r.samples[t] ? 0 : 1) << '\n';
        write_file_atomic(output, os.str());
      }
      std::cout << json{{"median", val(r.median)},
                        {"lower_quartile", val(r.lower_quartile)},
                        {"upper_quartile", val(r.upper_quartile)},
                        {"censored", r.censored},
                        {"trials", trials}}
                       .dump(2)
                << "\n";
    } else if (*krun) {
      auto f = resolve_family(family);
      auto size = parse_box(box_text);
      auto b = default_box(f, size.width, size.height);
      SimParams p{f, q, b.region, b.exterior, t_max, seed, 0};
      auto r = batch_tau0(p, trials, persistence ? StopRule::Persistence : StopRule::Tau0);
      std::ostringstream os;
      write_kcm_csv(os, p, r.samples);
      emit(os.str(), output);
      std::cerr << "median=" << (r.summary.median ? format_double(*r.summary.median) : "censored")
                << " mean=" << format_double(r.summary.mean) << " stderr=" << format_double(r.summary.std_error)
                << " censored=" << format_double(r.summary.censor_fraction) << "\n";
    } else if (*exact) {
      auto f = resolve_family(family);
      auto size = parse_box(box_text);
      auto b = default_box(f, size.width, size.height);
      auto j = to_json(exact_report(build_generator(f, b.region, b.exterior, q)));
      j["family"] = f.name();
      j["q"] = q;
      j["box"] = box_text;
      emit(j.dump(2) + "\n", output);
    } else if (*barrier) {
      auto r = east_barrier(static_cast<int>(ell));
      std::cout << json{{"ell", ell}, {"barrier", r.barrier}, {"states_visited", r.states_visited}}.dump(2) << "\n";
    } else if (*reach) {
      auto r = an_reachability(resolve_family(family), n, static_cast<int>(kappa));
      std::cout << json{{"n", n},
                        {"kappa", kappa},
                        {"side", r.side},
                        {"origin_infectable", r.origin_infectable},
                        {"reachable_states", r.reachable_states}}
                       .dump(2)
                << "\n";
    } else if (*phi) {
      ColumnGeometry g(n_cols);
      std::vector<std::uint8_t> w;
      if (!input.empty()) {
        w = configuration_from_empties(g.v(), read_sites_csv(std::filesystem::path(input))).bits;
      } else {
        if (!(q >= 0.0 && q <= 1.0)) throw Error("q must lie in [0, 1]");
        RandomStream rng(seed, 0x64726f70);
        w = sample_omega(g, q, rng);
      }
      auto p = DropletAlgorithm(g, ell).run(w);
      emit(droplet_json(p, b1_n, b2_n, event_B2(g, w, p, b2_n)).dump(2) + "\n", output);
    } else if (*sweep) {
      sc.kind = parse_kind(kind);
      auto r = run_sweep(sc);
      for (auto& c : r.cells)
        std::cerr << "q=" << q_label(c.q) << " " << (c.ok ? "ok" : "failed: " + c.error) << "\n";
      std::cout << r.manifest.string() << "\n";
      if (!r.ok()) return 2;
    } else if (*fit) {
      std::ifstream in(input);
      std::cout << to_json(fit_scaling(read_scaling_points(in))).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
