#include "ikkt/evalmetrics.hpp"

#include "ikkt/errors.hpp"
#include "ikkt/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ikkt {

Vec y_vector(const CostWeights& w, const std::vector<int>& axis_map) {
  if (static_cast<int>(axis_map.size()) != w.q.size())
    throw std::invalid_argument("axis map length does not match q");
  Vec y(w.q.size());
  for (int i = 0; i < w.q.size(); ++i) y(i) = w.q(i) / w.r(axis_map[i]);
  return y;
}

double cost_rmse(const CostWeights& truth, const CostWeights& est, const std::vector<int>& axis_map) {
  const Vec d = y_vector(truth, axis_map) - y_vector(est, axis_map);
  return std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
}

namespace {

struct Rect {
  double x0, y0, x1, y1;
  double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
  bool empty() const { return !(x1 > x0 && y1 > y0); }
};

Rect meet(const Rect& a, const Rect& b) {
  return {std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
}

Rect to_rect(const BoxConstraint& b) {
  if (b.nw() != 2) throw std::invalid_argument("box metrics need two-dimensional boxes");
  return {b.lb(0), b.lb(1), b.ub(0), b.ub(1)};
}

// Inclusion-exclusion, pruning branches whose running intersection is empty.
double union_ie(const std::vector<Rect>& r, size_t start, const Rect& acc, int depth) {
  double total = 0.0;
  for (size_t i = start; i < r.size(); ++i) {
    const Rect m = depth == 0 ? r[i] : meet(acc, r[i]);
    if (m.empty()) continue;
    total += m.area() - union_ie(r, i + 1, m, depth + 1);
  }
  return total;
}

double union_of(const std::vector<Rect>& r) { return union_ie(r, 0, Rect{0, 0, 0, 0}, 0); }

std::vector<Rect> rects(const std::vector<BoxConstraint>& boxes) {
  std::vector<Rect> r;
  for (const auto& b : boxes) {
    Rect x = to_rect(b);
    if (!x.empty()) r.push_back(x);
  }
  return r;
}

}  // namespace

double union_area(const std::vector<BoxConstraint>& boxes) { return union_of(rects(boxes)); }

BoxMetrics box_metrics(const std::vector<BoxConstraint>& pred, const std::vector<BoxConstraint>& truth) {
  const auto P = rects(pred), T = rects(truth);
  std::vector<Rect> both;
  for (const auto& p : P)
    for (const auto& t : T) {
      Rect m = meet(p, t);
      if (!m.empty()) both.push_back(m);
    }
  const double ap = union_of(P), at = union_of(T), ai = union_of(both);
  BoxMetrics m;
  if (ap <= 0.0 && at <= 0.0) return {1.0, 1.0, 1.0, 1.0};
  m.precision = ap > 0.0 ? ai / ap : 0.0;
  m.recall = at > 0.0 ? ai / at : 0.0;
  m.f1 = m.precision * m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  const double au = ap + at - ai;
  m.iou = au > 0.0 ? ai / au : 0.0;
  return m;
}

CostWeights perturb_weights(const CostWeights& w, double sigma) {
  CostWeights p = w;
  p.q(0) += sigma;
  p.q(1) -= sigma;
  return p;
}

void validate_sweep(const SweepConfig& cfg) {
  for (double v : cfg.sigmas)
    if (!std::isfinite(v)) throw ConfigError("sweep sigmas must be finite");
  if (!(cfg.time_limit > 0.0)) throw ConfigError("sweep time limit must be positive");
  if (cfg.threads < 1) throw ConfigError("sweep threads must be at least 1");
}

SweepTable perturbation_sweep(const std::vector<Scenario>& scenarios, const SweepConfig& cfg) {
  validate_sweep(cfg);
  std::vector<const Scenario*> sel;
  for (const auto& s : scenarios)
    if (cfg.scenarios.empty() ||
        std::find(cfg.scenarios.begin(), cfg.scenarios.end(), s.name) != cfg.scenarios.end())
      sel.push_back(&s);
  for (const auto& name : cfg.scenarios)
    if (std::none_of(sel.begin(), sel.end(), [&](const Scenario* s) { return s->name == name; }))
      throw ConfigError("unknown scenario " + name);
  for (const auto* s : sel)
    if (!s->weights_truth) throw ConfigError("scenario " + s->name + " has no truth weights");

  const int ns = static_cast<int>(sel.size());
  std::vector<std::vector<Trajectory>> demos(ns);
  std::vector<Segmentation> segs(ns);
  parallel_for(ns, cfg.threads, [&](int i) {
    demos[i] = generate_demos(*sel[i]);
    segs[i] = segment_demonstrations(demos[i], sel[i]->known_constraints, sel[i]->dynamics,
                                     cfg.pipeline.segment);
  });

  const int nsig = static_cast<int>(cfg.sigmas.size());
  const int per = nsig + (cfg.learned_row ? 1 : 0);
  SweepTable t;
  t.cells.resize(static_cast<size_t>(per) * ns);
  parallel_for(per * ns, cfg.threads, [&](int job) {
    const int col = job / ns, i = job % ns;
    const Scenario& s = *sel[i];
    SweepCell& c = t.cells[job];
    c.scenario = s.name;
    c.learned = col == nsig;
    c.sigma = c.learned ? 0.0 : cfg.sigmas[col];
    PipelineConfig pc = cfg.pipeline;
    pc.constraints.n_b = static_cast<int>(s.unknown_constraints_truth.size());
    pc.constraints.mip.time_limit = cfg.time_limit;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      CostWeights w;
      ConstraintReport rep;
      if (c.learned) {
        auto r = run_pipeline(demos[i], s.known_constraints, s.dynamics, pc);
        w = r.weights;
        c.boxes = r.boxes;
        rep = r.constraint_report;
      } else {
        w = perturb_weights(*s.weights_truth, c.sigma);
        c.boxes = extract_constraints(demos[i], w, s.known_constraints, s.dynamics, pc.constraints,
                                      &segs[i], &rep);
      }
      c.rmse = cost_rmse(*s.weights_truth, w, s.dynamics.axis_map);
      c.solved = true;
      c.converged = rep.converged;
      c.status = to_string(rep.status);
      c.metrics = box_metrics(c.boxes, s.unknown_constraints_truth);
    } catch (const std::exception& e) {
      c.status = std::string("failed: ") + e.what();
      if (!c.learned) c.rmse = cost_rmse(*s.weights_truth, perturb_weights(*s.weights_truth, c.sigma),
                                         s.dynamics.axis_map);
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  for (int col = 0; col < per; ++col) {
    SweepRow r;
    r.learned = col == nsig;
    r.sigma = r.learned ? 0.0 : cfg.sigmas[col];
    for (int i = 0; i < ns; ++i) {
      const auto& c = t.cells[static_cast<size_t>(col) * ns + i];
      ++r.cells;
      r.conv_pct += c.converged ? 1.0 : 0.0;
      r.rmse += c.rmse;
      r.metrics.precision += c.metrics.precision;
      r.metrics.recall += c.metrics.recall;
      r.metrics.f1 += c.metrics.f1;
      r.metrics.iou += c.metrics.iou;
    }
    if (r.cells > 0) {
      const double n = r.cells;
      r.conv_pct *= 100.0 / n;
      r.rmse /= n;
      r.metrics.precision /= n;
      r.metrics.recall /= n;
      r.metrics.f1 /= n;
      r.metrics.iou /= n;
    }
    t.rows.push_back(r);
  }
  return t;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const SweepTable& t) {
  std::ostringstream os;
  os << "sigma,conv_pct,rmse,precision,recall,f1,iou\n";
  for (const auto& r : t.rows)
    os << (r.learned ? std::string("learned") : num(r.sigma)) << ',' << num(r.conv_pct) << ','
       << num(r.rmse) << ',' << num(r.metrics.precision) << ',' << num(r.metrics.recall) << ','
       << num(r.metrics.f1) << ',' << num(r.metrics.iou) << '\n';
  return os.str();
}

std::string sweep_cells_csv(const SweepTable& t) {
  std::ostringstream os;
  os << "sigma,scenario,converged,status,rmse,precision,recall,f1,iou,seconds\n";
  for (const auto& c : t.cells) {
    std::string st = c.status;
    std::replace(st.begin(), st.end(), ',', ';');
    std::replace(st.begin(), st.end(), '\n', ' ');
    os << (c.learned ? std::string("learned") : num(c.sigma)) << ',' << c.scenario << ','
       << (c.converged ? 1 : 0) << ',' << st << ',' << num(c.rmse) << ','
       << num(c.metrics.precision) << ',' << num(c.metrics.recall) << ',' << num(c.metrics.f1)
       << ',' << num(c.metrics.iou) << ',' << num(c.seconds) << '\n';
  }
  return os.str();
}

}  // namespace ikkt
