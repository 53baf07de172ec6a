// ikkt-miner: command-line front end for cost and constraint learning from demonstrations.

#include "ikkt/conslearn.hpp"
#include "ikkt/costlearn.hpp"
#include "ikkt/demogen.hpp"
#include "ikkt/errors.hpp"
#include "ikkt/evalmetrics.hpp"
#include "ikkt/io.hpp"
#include "ikkt/pipeline.hpp"
#include "ikkt/segmenter.hpp"
#include "ikkt/svg.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace ikkt;

namespace {

struct Options {
  int threads = 0;
  unsigned long long seed = 0;
  std::string scenario;  // JSON path
  std::string builtin;   // catalog letter
  std::string demos;
  std::string out;
  std::string weights;
  std::string boxes;
  std::vector<std::string> csv;
  int n_boxes = -1;
  double time_limit = 600.0;
  int window = 5;
  double alpha = 0.05;
  double control_noise = 0.0;
  int noise_steps = 0;
  double dyn_tol = 1e-6;
  std::string sigmas;
  std::string scenarios;
  bool quiet = false;
};

int threads_of(const Options& o) {
  if (const char* env = std::getenv("IKKT_THREADS"); env && *env) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError("IKKT_THREADS must be a positive integer");
  }
  if (o.threads > 0) return o.threads;
  return default_threads();
}

void log(const Options& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << "\n";
}

Scenario load_scenario(const Options& o) {
  if (!o.scenario.empty() && !o.builtin.empty())
    throw ConfigError("give either --scenario or --builtin, not both");
  if (!o.builtin.empty()) {
    try {
      return builtin_scenario(o.builtin);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (!o.scenario.empty()) return scenario_from_json(read_json(o.scenario));
  if (!o.demos.empty() && fs::exists(fs::path(o.demos) / "scenario.json"))
    return scenario_from_json(read_json(fs::path(o.demos) / "scenario.json"));
  throw ConfigError("no scenario: give --scenario, --builtin, or a demo directory with scenario.json");
}

std::vector<Trajectory> load_demos(const Options& o, const Scenario& s) {
  if (o.demos.empty()) throw ConfigError("--demos is required");
  auto trajs = read_demos(o.demos, s.dynamics.nx(), s.dynamics.nu());
  for (size_t i = 0; i < trajs.size(); ++i)
    if (const auto e = check_trajectory(trajs[i], s.dynamics); !e.empty())
      throw ConfigError("demo " + std::to_string(i) + ": " + e);
  return trajs;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

PipelineConfig pipeline_config(const Options& o, const Scenario& s, int threads) {
  PipelineConfig c;
  c.segment.window = o.window;
  c.segment.alpha = o.alpha;
  c.segment.threads = threads;
  c.constraints.segment = c.segment;
  c.constraints.n_b = o.n_boxes >= 0 ? o.n_boxes
                                     : std::max(1, static_cast<int>(s.unknown_constraints_truth.size()));
  c.constraints.mip.time_limit = o.time_limit;
  c.constraints.mip.threads = threads;
  return c;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad number in list: '" + item + "'");
    }
  }
  return v;
}

std::string metrics_csv(const Scenario& s, const CostWeights* w, const std::vector<BoxConstraint>& boxes) {
  std::ostringstream os;
  os << "scenario,rmse,precision,recall,f1,iou\n";
  const auto m = box_metrics(boxes, s.unknown_constraints_truth);
  os << s.name << ',';
  if (w && s.weights_truth) os << cost_rmse(*s.weights_truth, *w, s.dynamics.axis_map);
  os << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.iou << "\n";
  return os.str();
}

Json report_json(const ConstraintReport& r) {
  return {{"format_version", kFormatVersion}, {"status", to_string(r.status)},
          {"converged", r.converged},         {"objective", r.objective},
          {"rounds", r.rounds},               {"supported", r.supported}};
}

void write_segmentation(const fs::path& dir, const Segmentation& seg) {
  write_text(dir / "segmentation.csv", segmentation_csv(seg));
  for (size_t d = 0; d < seg.demos.size(); ++d)
    write_text(dir / ("trace_" + std::to_string(d) + ".svg"),
               svg_trace(seg, static_cast<int>(d), "demo " + std::to_string(d)));
}

// Subcommands.

int cmd_gen(const Options& o) {
  const auto s = load_scenario(o);
  if (!(o.control_noise >= 0.0)) throw ConfigError("--control-noise must be non-negative");
  const auto dir = out_dir(o);
  auto trajs = generate_demos(s, {}, threads_of(o));
  if (o.control_noise > 0.0) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> n(0.0, o.control_noise);
    for (auto& t : trajs) {
      Mat u = t.controls;
      std::vector<int> steps(u.rows());
      std::iota(steps.begin(), steps.end(), 0);
      if (o.noise_steps > 0) {
        std::shuffle(steps.begin(), steps.end(), rng);
        steps.resize(std::min<size_t>(steps.size(), o.noise_steps));
        std::sort(steps.begin(), steps.end());
      }
      for (int k : steps)
        for (int i = 0; i < u.cols(); ++i) u(k, i) += n(rng);
      t = rollout(s.dynamics, t.x(0), u);
    }
  }
  write_demos(dir, trajs);
  write_json(dir / "scenario.json", scenario_to_json(s));
  log(o, "wrote " + std::to_string(trajs.size()) + " demos to " + dir.string());
  return 0;
}

int cmd_ingest(const Options& o) {
  const auto s = load_scenario(o);
  const auto dir = out_dir(o);
  std::vector<fs::path> files(o.csv.begin(), o.csv.end());
  if (files.empty()) throw ConfigError("--csv is required");
  std::vector<Trajectory> trajs;
  for (const auto& f : files) {
    Trajectory t;
    try {
      t = trajectory_from_csv(read_text(f), s.dynamics.nx(), s.dynamics.nu());
    } catch (const ConfigError& e) {
      throw ConfigError(f.filename().string() + ": " + e.what());
    }
    if (const auto e = check_trajectory(t, s.dynamics); !e.empty())
      throw ConfigError(f.filename().string() + ": " + e);
    double dev = 0.0, scale = 1.0;
    for (int k = 0; k + 1 < t.length(); ++k) {
      const Vec pred = s.dynamics.A * t.x(k) + s.dynamics.B * t.u(k);
      dev = std::max(dev, (t.x(k + 1) - pred).cwiseAbs().maxCoeff());
      scale = std::max(scale, t.x(k + 1).cwiseAbs().maxCoeff());
    }
    if (dev > o.dyn_tol * scale)
      throw ConfigError(f.filename().string() + ": states do not follow the dynamics (deviation " +
                        std::to_string(dev) + ")");
    trajs.push_back(std::move(t));
  }
  write_demos(dir, trajs);
  write_json(dir / "scenario.json", scenario_to_json(s));
  log(o, "ingested " + std::to_string(trajs.size()) + " trajectories into " + dir.string());
  return 0;
}

int cmd_segment(const Options& o) {
  const auto s = load_scenario(o);
  const auto trajs = load_demos(o, s);
  const auto dir = out_dir(o);
  const auto cfg = pipeline_config(o, s, threads_of(o));
  validate_config(cfg.constraints);
  const auto seg = segment_demonstrations(trajs, s.known_constraints, s.dynamics, cfg.segment);
  write_segmentation(dir, seg);
  Json active = Json::array();
  for (const auto& d : seg.demos) active.push_back(d.active);
  write_json(dir / "active.json", {{"format_version", kFormatVersion}, {"active", active}});
  return 0;
}

int cmd_learn_cost(const Options& o) {
  const auto s = load_scenario(o);
  const auto trajs = load_demos(o, s);
  const auto dir = out_dir(o);
  const auto cfg = pipeline_config(o, s, threads_of(o));
  const auto seg = segment_demonstrations(trajs, s.known_constraints, s.dynamics, cfg.segment);
  write_segmentation(dir, seg);
  const auto w = extract_cost(trajs, seg, s.known_constraints, s.dynamics, cfg.cost);
  write_json(dir / "weights.json", weights_to_json(w));
  return 0;
}

int cmd_learn_constraints(const Options& o) {
  const auto s = load_scenario(o);
  const auto trajs = load_demos(o, s);
  if (o.weights.empty()) throw ConfigError("--weights is required");
  const auto w = weights_from_json(read_json(o.weights));
  const auto dir = out_dir(o);
  const auto cfg = pipeline_config(o, s, threads_of(o));
  ConstraintReport rep;
  const auto boxes =
      extract_constraints(trajs, w, s.known_constraints, s.dynamics, cfg.constraints, nullptr, &rep);
  write_json(dir / "boxes.json", boxes_to_json(boxes));
  write_json(dir / "report.json", report_json(rep));
  write_text(dir / "overlay.svg", svg_overlay(trajs, s.unknown_constraints_truth, boxes, s.name));
  log(o, std::string("constraint program: ") + to_string(rep.status));
  return 0;
}

int cmd_learn(const Options& o) {
  const auto s = load_scenario(o);
  const auto trajs = load_demos(o, s);
  const auto dir = out_dir(o);
  const auto cfg = pipeline_config(o, s, threads_of(o));
  validate_config(cfg.constraints);
  const auto r = run_pipeline(trajs, s.known_constraints, s.dynamics, cfg);
  write_segmentation(dir, r.seg);
  write_json(dir / "weights.json", weights_to_json(r.weights));
  write_json(dir / "boxes.json", boxes_to_json(r.boxes));
  write_json(dir / "report.json", report_json(r.constraint_report));
  if (!s.unknown_constraints_truth.empty())
    write_text(dir / "metrics.csv", metrics_csv(s, &r.weights, r.boxes));
  write_text(dir / "overlay.svg", svg_overlay(trajs, s.unknown_constraints_truth, r.boxes, s.name));
  log(o, std::string("constraint program: ") + to_string(r.constraint_report.status) + ", " +
             std::to_string(r.seconds) + " s");
  return 0;
}

int cmd_eval(const Options& o) {
  const auto s = load_scenario(o);
  if (o.boxes.empty()) throw ConfigError("--boxes is required");
  const auto boxes = boxes_from_json(read_json(o.boxes));
  std::optional<CostWeights> w;
  if (!o.weights.empty()) w = weights_from_json(read_json(o.weights));
  const auto csv = metrics_csv(s, w ? &*w : nullptr, boxes);
  if (!o.out.empty()) write_text(out_dir(o) / "metrics.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_sweep(const Options& o) {
  SweepConfig c;
  if (!o.sigmas.empty()) c.sigmas = parse_list(o.sigmas);
  c.time_limit = o.time_limit;
  c.threads = threads_of(o);
  c.pipeline.segment.window = o.window;
  c.pipeline.segment.alpha = o.alpha;
  c.pipeline.constraints.segment = c.pipeline.segment;
  std::vector<Scenario> set;
  if (!o.scenario.empty()) {
    set.push_back(scenario_from_json(read_json(o.scenario)));
  } else {
    set = builtin_scenarios();
    if (!o.scenarios.empty()) {
      std::stringstream ss(o.scenarios);
      for (std::string n; std::getline(ss, n, ',');) c.scenarios.push_back(n);
    }
  }
  validate_sweep(c);
  const auto dir = out_dir(o);
  const auto t = perturbation_sweep(set, c);
  write_text(dir / "sweep.csv", sweep_csv(t));
  write_text(dir / "sweep_cells.csv", sweep_cells_csv(t));
  write_text(dir / "sweep.svg", svg_sweep(t));
  std::cout << sweep_csv(t);
  return 0;
}

int cmd_plot(const Options& o) {
  const auto s = load_scenario(o);
  const auto trajs = load_demos(o, s);
  std::vector<BoxConstraint> boxes;
  if (!o.boxes.empty()) boxes = boxes_from_json(read_json(o.boxes));
  write_text(out_dir(o) / "overlay.svg", svg_overlay(trajs, s.unknown_constraints_truth, boxes, s.name));
  return 0;
}

int fail(int code, const char* kind, const std::string& msg) {
  std::cerr << Json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Learn cost weights and box constraints from demonstrations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", o.threads, "Worker threads (IKKT_THREADS overrides; default: cores)");
  app.add_option("--seed", o.seed, "Seed for noise injection");
  app.add_flag("-q,--quiet", o.quiet, "No progress messages");

  auto scenario_opts = [&](CLI::App* c) {
    c->add_option("--scenario", o.scenario, "Scenario JSON");
    c->add_option("--builtin", o.builtin, "Catalog scenario a..h");
  };
  auto learn_opts = [&](CLI::App* c) {
    scenario_opts(c);
    c->add_option("--demos", o.demos, "Directory of trajectory CSVs")->required();
    c->add_option("--out", o.out, "Output directory")->required();
    c->add_option("--window", o.window, "States per segmentation window");
    c->add_option("--alpha", o.alpha, "GESD significance level");
    c->add_option("--n-boxes", o.n_boxes, "Unknown boxes (default: truth count, else 1)");
    c->add_option("--time-limit", o.time_limit, "Seconds per constraint program");
  };

  auto* gen = app.add_subcommand("gen", "Forward-solve demos from a scenario");
  scenario_opts(gen);
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--control-noise", o.control_noise, "Gaussian noise on controls, states re-rolled");
  gen->add_option("--noise-steps", o.noise_steps, "Perturb only this many random steps per demo");

  auto* ingest = app.add_subcommand("ingest", "Validate recorded trajectory CSVs");
  scenario_opts(ingest);
  ingest->add_option("--csv", o.csv, "Trajectory CSV files")->required();
  ingest->add_option("--out", o.out, "Output directory")->required();
  ingest->add_option("--dyn-tol", o.dyn_tol, "Relative tolerance on x[k+1] - A x[k] - B u[k]");

  auto* segment = app.add_subcommand("segment", "Flag constrained steps");
  learn_opts(segment);
  auto* learn_cost = app.add_subcommand("learn-cost", "Segment then fit the cost weights");
  learn_opts(learn_cost);
  auto* learn_cons = app.add_subcommand("learn-constraints", "Fit boxes for given weights");
  learn_opts(learn_cons);
  learn_cons->add_option("--weights", o.weights, "Weights JSON")->required();
  auto* learn = app.add_subcommand("learn", "Segment, fit the cost, then fit boxes");
  learn_opts(learn);

  auto* eval = app.add_subcommand("eval", "Score boxes (and weights) against scenario truth");
  scenario_opts(eval);
  eval->add_option("--boxes", o.boxes, "Boxes JSON")->required();
  eval->add_option("--weights", o.weights, "Weights JSON");
  eval->add_option("--out", o.out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Cost perturbation study");
  sweep->add_option("--scenario", o.scenario, "Scenario JSON (default: catalog)");
  sweep->add_option("--scenarios", o.scenarios, "Catalog subset, comma separated");
  sweep->add_option("--sigmas", o.sigmas, "Comma separated perturbations");
  sweep->add_option("--time-limit", o.time_limit, "Seconds per constraint program");
  sweep->add_option("--window", o.window, "States per segmentation window");
  sweep->add_option("--alpha", o.alpha, "GESD significance level");
  sweep->add_option("--out", o.out, "Output directory")->required();

  auto* plot = app.add_subcommand("plot", "SVG of demos, truth and recovered boxes");
  scenario_opts(plot);
  plot->add_option("--demos", o.demos, "Directory of trajectory CSVs")->required();
  plot->add_option("--boxes", o.boxes, "Boxes JSON");
  plot->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(2, "config", e.what());
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*ingest) return cmd_ingest(o);
    if (*segment) return cmd_segment(o);
    if (*learn_cost) return cmd_learn_cost(o);
    if (*learn_cons) return cmd_learn_constraints(o);
    if (*learn) return cmd_learn(o);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*plot) return cmd_plot(o);
  } catch (const InsufficientInactiveData& e) {
    return fail(4, "insufficient_inactive_data", e.what());
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const SolverError& e) {
    return fail(3, "solver", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(2, "config", e.what());
  } catch (const std::exception& e) {
    return fail(3, "solver", e.what());
  }
  return 2;
}
