#include "ikkt/conslearn.hpp"

#include "ikkt/errors.hpp"
#include "ikkt/kkt.hpp"
#include "ikkt/weightfit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>

namespace ikkt {

MipConfig default_constraint_mip() {
  MipConfig m;
  m.time_limit = 600.0;
  return m;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Projected whole-trajectory stationarity of one demo with q, r substituted.
// Columns: box multipliers per (candidate step, face), then active known multipliers.
struct DemoSystem {
  Mat R;
  Vec t;
  double floor = 0.0;
  std::vector<std::pair<int, int>> box_cols;  // (step, face)
  int n_known = 0;
};

DemoSystem reduce_demo(const Trajectory& traj, const CostWeights& w,
                       const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                       const std::vector<int>& candidates, const std::vector<int>& dims,
                       double active_tol) {
  const int nd = static_cast<int>(dims.size());
  BoxConstraint probe;
  probe.kind = ConstraintKind::Exclusive;
  probe.target = ConstraintTarget::State;
  probe.dims = dims;
  probe.lb = Vec::Zero(nd);
  probe.ub = Vec::Zero(nd);
  std::vector<BoxConstraint> cons = known;
  cons.push_back(probe);
  const auto cs = ConstraintSet::split(cons);
  const auto ks = ConstraintSet::split(known);
  const auto sel = SelectorVectors::all(static_cast<int>(cs.state.size()),
                                        static_cast<int>(cs.control.size()), 1);
  auto b = assemble_stationarity({0, traj.length() - 1}, traj, cons, sel, dyn);
  b = substitute(b, BlockKind::Q, -1, w.q);
  b = substitute(b, BlockKind::R, -1, w.r);

  const std::set<int> cand(candidates.begin(), candidates.end());
  const int box_row0 = cs.state_rows() - 2 * nd;
  DemoSystem ds;
  std::vector<int> box_keep, known_keep, free;
  for (const auto& blk : b.layout.blocks) {
    switch (blk.kind) {
      case BlockKind::LambdaX: {
        // The endpoint equalities absorb any multiplier at the first and last state.
        if (blk.step == 0 || blk.step == traj.length() - 1) break;
        const Vec g = constraint_rows(ks.state, traj.x(blk.step));
        for (int r = 0; r < box_row0; ++r)
          if (std::abs(g(r)) <= active_tol) known_keep.push_back(blk.offset + r);
        if (cand.count(blk.step))
          for (int f = 0; f < 2 * nd; ++f) {
            box_keep.push_back(blk.offset + box_row0 + f);
            ds.box_cols.emplace_back(blk.step, f);
          }
        break;
      }
      case BlockKind::LambdaU: {
        const Vec g = constraint_rows(ks.control, traj.u(blk.step));
        for (int r = 0; r < blk.size; ++r)
          if (std::abs(g(r)) <= active_tol) known_keep.push_back(blk.offset + r);
        break;
      }
      case BlockKind::ThetaD:
      case BlockKind::ThetaS:
      case BlockKind::ThetaG:
        for (int i = 0; i < blk.size; ++i) free.push_back(blk.offset + i);
        break;
      default:
        break;
    }
  }
  std::vector<int> keep = box_keep;
  keep.insert(keep.end(), known_keep.begin(), known_keep.end());
  ds.n_known = static_cast<int>(known_keep.size());
  Mat K(b.coeffs.rows(), static_cast<Eigen::Index>(keep.size()));
  Mat F(b.coeffs.rows(), static_cast<Eigen::Index>(free.size()));
  for (size_t i = 0; i < keep.size(); ++i) K.col(i) = b.coeffs.col(keep[i]);
  for (size_t i = 0; i < free.size(); ++i) F.col(i) = b.coeffs.col(free[i]);
  const auto ps = project_out(K, F, b.constant);
  ds.R = ps.R;
  ds.t = ps.t;
  ds.floor = ps.residual_floor;
  return ds;
}

double workspace_scale(const std::vector<Trajectory>& trajs, const std::vector<BoxConstraint>& known,
                       const std::vector<int>& dims) {
  double s = 0.0;
  for (const auto& t : trajs)
    for (int d : dims) s = std::max(s, t.states.col(d).cwiseAbs().maxCoeff());
  for (const auto& k : known) {
    if (k.lb.size()) s = std::max(s, k.lb.cwiseAbs().maxCoeff());
    if (k.ub.size()) s = std::max(s, k.ub.cwiseAbs().maxCoeff());
  }
  return std::max(s, 1.0);
}

// Row value of face f (lb faces first) for the box (lb, ub) at point w.
double face_value(int f, int nd, const std::vector<int>& dims, const Vec& lb, const Vec& ub,
                  const Vec& w) {
  const int i = f % nd;
  return f < nd ? w(dims[i]) - lb(i) : ub(i) - w(dims[i]);
}

// Free fit: box multipliers at the candidate steps and known multipliers, all nonnegative.
std::vector<Vec> free_fit(const std::vector<DemoSystem>& sys) {
  int rows = 0, cols = 1;
  for (const auto& s : sys) {
    rows += static_cast<int>(s.R.rows());
    cols += static_cast<int>(s.R.cols());
  }
  std::vector<Vec> out;
  if (cols == 1) {
    for (const auto& s : sys) out.push_back(Vec::Zero(s.R.cols()));
    return out;
  }
  Mat M = Mat::Zero(rows, cols);
  int ro = 0, co = 0;
  for (const auto& s : sys) {
    M.block(ro, co, s.R.rows(), s.R.cols()) = s.R;
    M.block(ro, cols - 1, s.R.rows(), 1) = s.t;
    ro += static_cast<int>(s.R.rows());
    co += static_cast<int>(s.R.cols());
  }
  Vec S = Vec::Ones(cols);
  const double cmax = M.colwise().norm().maxCoeff();
  for (int c = 0; c < cols; ++c) {
    const double nc = M.col(c).norm();
    if (nc > 1e-12 * cmax) S(c) = 1.0 / nc;
  }
  const Mat Ms = M * S.asDiagonal();
  Mat E = Mat::Zero(1, cols);
  E(0, cols - 1) = S(cols - 1);
  Vec lo = Vec::Zero(cols);
  lo(cols - 1) = -kInf;
  Vec a0 = Vec::Zero(cols);
  a0(cols - 1) = 1.0 / S(cols - 1);
  const Vec a = S.cwiseProduct(bounded_lsq(Ms, E, lo, a0));
  co = 0;
  for (const auto& s : sys) {
    out.push_back(a.segment(co, s.R.cols()));
    co += static_cast<int>(s.R.cols());
  }
  return out;
}

struct Contact {
  int demo = 0;
  int step = 0;
  int face = 0;
  double weight = 0.0;
};

struct Group {
  std::vector<Contact> members;
  Vec lb, ub;
  double weight = 0.0;
};

// Smallest box with every member on its face; empty when inconsistent or violating PF.
std::optional<Group> fit_group(std::vector<Contact> members, const std::vector<Trajectory>& trajs,
                               const std::vector<int>& dims, double eps_geo, double face_tol) {
  const int nd = static_cast<int>(dims.size());
  Group g;
  g.members = std::move(members);
  g.lb = Vec::Constant(nd, kInf);
  g.ub = Vec::Constant(nd, -kInf);
  Vec face_lo = Vec::Constant(2 * nd, kInf), face_hi = Vec::Constant(2 * nd, -kInf);
  for (const auto& c : g.members) {
    const Vec w = trajs[c.demo].x(c.step);
    const double v = w(dims[c.face % nd]);
    face_lo(c.face) = std::min(face_lo(c.face), v);
    face_hi(c.face) = std::max(face_hi(c.face), v);
    for (int i = 0; i < nd; ++i) {
      g.lb(i) = std::min(g.lb(i), w(dims[i]));
      g.ub(i) = std::max(g.ub(i), w(dims[i]));
    }
    g.weight += c.weight;
  }
  for (int f = 0; f < 2 * nd; ++f) {
    if (face_hi(f) < face_lo(f)) continue;
    if (face_hi(f) - face_lo(f) > face_tol) return std::nullopt;
    (f < nd ? g.lb(f) : g.ub(f - nd)) = 0.5 * (face_lo(f) + face_hi(f));
  }
  for (int i = 0; i < nd; ++i)
    if (g.lb(i) > g.ub(i)) return std::nullopt;
  for (const auto& c : g.members) {
    const Vec w = trajs[c.demo].x(c.step);
    for (int t = 0; t < 2 * nd; ++t)
      if (t != c.face && face_value(t, nd, dims, g.lb, g.ub, w) < eps_geo) return std::nullopt;
  }
  BoxConstraint b;
  b.dims = dims;
  b.lb = g.lb;
  b.ub = g.ub;
  for (const auto& t : trajs)
    for (int k = 0; k < t.length(); ++k)
      if (b.strictly_inside(t.x(k), 1e-7)) return std::nullopt;
  return g;
}

// Greedy agglomeration of contacts into at most n_b consistent boxes; each step takes the merge
// adding the least total edge length.
std::vector<Group> assign_contacts(const std::vector<Contact>& contacts,
                                   const std::vector<Trajectory>& trajs,
                                   const std::vector<int>& dims, int n_b, double eps_geo,
                                   double face_tol) {
  std::vector<Group> groups;
  for (const auto& c : contacts)
    if (auto g = fit_group({c}, trajs, dims, eps_geo, face_tol)) groups.push_back(*g);
  auto extent = [](const Group& g) { return (g.ub - g.lb).sum(); };
  while (static_cast<int>(groups.size()) > n_b) {
    int bi = -1, bj = -1;
    double best = kInf;
    std::optional<Group> best_g;
    for (size_t i = 0; i < groups.size(); ++i)
      for (size_t j = i + 1; j < groups.size(); ++j) {
        std::vector<Contact> m = groups[i].members;
        m.insert(m.end(), groups[j].members.begin(), groups[j].members.end());
        auto g = fit_group(m, trajs, dims, eps_geo, face_tol);
        if (!g) continue;
        const double growth = extent(*g) - extent(groups[i]) - extent(groups[j]);
        if (growth < best - 1e-12) {
          best = growth;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
          best_g = std::move(g);
        }
      }
    if (bi < 0) break;
    groups[bi] = std::move(*best_g);
    groups.erase(groups.begin() + bj);
  }
  std::stable_sort(groups.begin(), groups.end(),
                   [](const Group& a, const Group& b) { return a.weight > b.weight; });
  if (static_cast<int>(groups.size()) > n_b) groups.resize(n_b);
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    return std::lexicographical_compare(a.lb.data(), a.lb.data() + a.lb.size(), b.lb.data(),
                                        b.lb.data() + b.lb.size());
  });
  return groups;
}

}  // namespace

void validate_config(const ConstraintLearnConfig& cfg) {
  if (cfg.n_b < 0) throw ConfigError("n_b must be nonnegative");
  if (cfg.dims.empty()) throw ConfigError("box dims must not be empty");
  if (!(cfg.epsilon < 0.0 && cfg.epsilon >= -1e-3))
    throw ConfigError("epsilon must lie in [-1e-3, 0)");
  if (cfg.big_m < 0.0) throw ConfigError("big_m must be positive (0 selects the default)");
  if (cfg.regularizer < 0.0) throw ConfigError("regularizer must be nonnegative");
  if (cfg.lambda_big_m < 0.0) throw ConfigError("lambda_big_m must be nonnegative");
}

ProgramScope ProgramScope::full(const std::vector<Trajectory>& trajs, int n_b) {
  ProgramScope s;
  for (size_t d = 0; d < trajs.size(); ++d) {
    std::vector<int> all(trajs[d].length());
    for (int k = 0; k < trajs[d].length(); ++k) all[k] = k;
    s.candidates.push_back(all);
    for (int k = 0; k < trajs[d].length(); ++k)
      for (int b = 0; b < n_b; ++b) s.pf.push_back({static_cast<int>(d), k, b});
  }
  return s;
}

namespace {

ConstraintProgram assemble_program(const std::vector<Trajectory>& trajs,
                                   const std::vector<DemoSystem>& sys, const ConstraintLearnConfig& cfg,
                                   const ProgramScope& scope, double scale, double lambda_scale) {
  const int nb = cfg.n_b;
  const int nd = static_cast<int>(cfg.dims.size());
  const int nf = 2 * nd;
  ConstraintProgram prog;
  prog.n_b = nb;
  prog.nd = nd;
  prog.dims = cfg.dims;
  prog.big_m = cfg.big_m > 0.0 ? cfg.big_m : 10.0 * scale;
  prog.eps_geo = cfg.epsilon * scale;
  prog.lambda_scale = lambda_scale;
  prog.lambda_big_m = cfg.lambda_big_m > 0.0 ? cfg.lambda_big_m : 10.0 * lambda_scale;
  const double M = prog.big_m;
  const double ML = prog.lambda_big_m / lambda_scale;

  int n = 2 * nb * nd;
  std::vector<int> demo_off;
  for (const auto& s : sys) {
    demo_off.push_back(n);
    for (size_t c = 0; c < s.box_cols.size(); ++c) {
      ContactVars cv;
      cv.demo = static_cast<int>(demo_off.size()) - 1;
      cv.step = s.box_cols[c].first;
      cv.face = s.box_cols[c].second;
      cv.lambda = n + static_cast<int>(c);
      prog.contacts.push_back(cv);
    }
    for (int k = 0; k < s.n_known; ++k)
      prog.known_lambda.push_back(n + static_cast<int>(s.box_cols.size()) + k);
    n += static_cast<int>(s.R.cols());
  }
  for (auto& cv : prog.contacts)
    for (int b = 0; b < nb; ++b) cv.a.push_back(n++);
  for (size_t e = 0; e < scope.pf.size(); ++e) {
    std::vector<int> p;
    for (int f = 0; f < nf; ++f) p.push_back(n++);
    prog.pf_binaries.push_back(p);
  }

  auto& qp = prog.mip.base;
  qp = QuadraticProgram::with_size(n);
  double tt = 0.0;
  for (size_t d = 0; d < sys.size(); ++d) {
    const Mat Rs = sys[d].R * lambda_scale;
    const int o = demo_off[d];
    const int c = static_cast<int>(Rs.cols());
    qp.P.block(o, o, c, c) = 2.0 * Rs.transpose() * Rs;
    qp.q.segment(o, c) = 2.0 * Rs.transpose() * sys[d].t;
    tt += sys[d].t.squaredNorm();
    prog.constant += sys[d].t.squaredNorm() + sys[d].floor;
  }
  prog.floor = -tt;
  for (int b = 0; b < nb; ++b)
    for (int i = 0; i < nd; ++i) {
      qp.q(prog.ub_index(b, i)) += cfg.regularizer;
      qp.q(prog.lb_index(b, i)) -= cfg.regularizer;
    }

  for (int j = 0; j < 2 * nb * nd; ++j) {
    qp.lo(j) = -M;
    qp.hi(j) = M;
  }
  for (const auto& cv : prog.contacts) {
    qp.lo(cv.lambda) = 0.0;
    qp.hi(cv.lambda) = ML;
    for (int a : cv.a) {
      qp.lo(a) = 0.0;
      qp.hi(a) = 1.0;
      prog.mip.binary_indices.push_back(a);
    }
  }
  for (int j : prog.known_lambda) qp.lo(j) = 0.0;
  for (const auto& p : prog.pf_binaries) {
    for (int j : p) {
      qp.lo(j) = 0.0;
      qp.hi(j) = 1.0;
      prog.mip.binary_indices.push_back(j);
    }
    prog.mip.cardinality_groups.push_back(p);
  }

  // Rows as (coefficients, rhs) over sparse entries.
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> rhs;
  // e = c + g'z for face f of box b at point w.
  auto face_expr = [&](int b, int f, const Vec& w, std::vector<std::pair<int, double>>& g) {
    const int i = f % nd;
    const double wi = w(cfg.dims[i]);
    if (f < nd) {
      g.push_back({prog.lb_index(b, i), -1.0});
      return wi;
    }
    g.push_back({prog.ub_index(b, i), 1.0});
    return -wi;
  };
  auto add_row = [&](std::vector<std::pair<int, double>> r, double h) {
    rows.push_back(std::move(r));
    rhs.push_back(h);
  };

  for (const auto& cv : prog.contacts) {
    const Vec w = trajs[cv.demo].x(cv.step);
    std::vector<std::pair<int, double>> lam{{cv.lambda, 1.0}};
    for (int b = 0; b < nb; ++b) {
      const int a = cv.a[b];
      lam.push_back({a, -ML});
      std::vector<std::pair<int, double>> g;
      const double c = face_expr(b, cv.face, w, g);
      // a = 1 puts the point on the face: |e| <= M (1 - a).
      auto up = g;
      up.push_back({a, M});
      add_row(up, M - c);
      auto dn = g;
      for (auto& [j, v] : dn) v = -v;
      dn.push_back({a, M});
      add_row(dn, M + c);
      // Orthogonal faces lie at or beyond the active point.
      for (int t = 0; t < nf; ++t) {
        if (t == cv.face) continue;
        std::vector<std::pair<int, double>> gt;
        const double ct = face_expr(b, t, w, gt);
        for (auto& [j, v] : gt) v = -v;
        gt.push_back({a, M});
        add_row(gt, M - prog.eps_geo + ct);
      }
    }
    add_row(lam, 0.0);
  }
  for (size_t e = 0; e < scope.pf.size(); ++e) {
    const auto& pr = scope.pf[e];
    const Vec w = trajs.at(pr.demo).x(pr.step);
    for (int f = 0; f < nf; ++f) {
      std::vector<std::pair<int, double>> g;
      const double c = face_expr(pr.box, f, w, g);
      g.push_back({prog.pf_binaries[e][f], M});
      add_row(g, M - c);
    }
  }
  for (int b = 0; b < nb; ++b) {
    for (int i = 0; i < nd; ++i)
      add_row({{prog.lb_index(b, i), 1.0}, {prog.ub_index(b, i), -1.0}}, 0.0);
    if (b + 1 < nb) add_row({{prog.lb_index(b, 0), 1.0}, {prog.lb_index(b + 1, 0), -1.0}}, 0.0);
  }

  qp.Gin = Mat::Zero(static_cast<Eigen::Index>(rows.size()), n);
  qp.hin = Vec(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [j, v] : rows[r]) qp.Gin(static_cast<Eigen::Index>(r), j) += v;
    qp.hin(static_cast<Eigen::Index>(r)) = rhs[r];
  }
  return prog;
}

// With binaries and multipliers fixed the box coordinates enter only the regularizer, which is
// below QP tolerances at its weight; minimize sum(ub - lb) at unit weight instead.
void polish_boxes(const ConstraintProgram& prog, Vec& z, const SolverConfig& qpcfg) {
  QuadraticProgram lp = prog.mip.base;
  const int nbox = 2 * prog.n_b * prog.nd;
  for (int j = nbox; j < lp.n(); ++j) lp.lo(j) = lp.hi(j) = z(j);
  lp.P.setZero();
  lp.q.setZero();
  for (int b = 0; b < prog.n_b; ++b)
    for (int i = 0; i < prog.nd; ++i) {
      lp.q(prog.ub_index(b, i)) = 1.0;
      lp.q(prog.lb_index(b, i)) = -1.0;
    }
  const auto s = solve_qp(lp, qpcfg, &z);
  if (s.status == QpStatus::Optimal) z.head(nbox) = s.z.head(nbox);
}

void check_inputs(const std::vector<Trajectory>& trajs, const CostWeights& weights,
                  const LinearDynamics& dyn, const ConstraintLearnConfig& cfg, double scale) {
  validate_config(cfg);
  if (auto e = check_weights(weights); !e.empty()) throw ConfigError(e);
  if (weights.q.size() != dyn.nx() || weights.r.size() != dyn.nu())
    throw ConfigError("weights do not match the dynamics");
  for (int d : cfg.dims)
    if (d < 0 || d >= dyn.nx()) throw ConfigError("box dim out of range");
  for (const auto& t : trajs)
    if (auto e = check_trajectory(t, dyn); !e.empty()) throw ConfigError(e);
  const double M = cfg.big_m > 0.0 ? cfg.big_m : 10.0 * scale;
  if (!(scale < 0.5 * M)) throw ConfigError("demo coordinates are not covered by big_m");
}

}  // namespace

ConstraintProgram build_constraint_program(const std::vector<Trajectory>& trajs,
                                           const CostWeights& weights,
                                           const std::vector<BoxConstraint>& known,
                                           const LinearDynamics& dyn,
                                           const ConstraintLearnConfig& cfg,
                                           const ProgramScope* scope) {
  const double scale = workspace_scale(trajs, known, cfg.dims);
  check_inputs(trajs, weights, dyn, cfg, scale);
  const ProgramScope sc = scope ? *scope : ProgramScope::full(trajs, cfg.n_b);
  if (sc.candidates.size() != trajs.size()) throw ConfigError("scope does not match the demos");
  std::vector<DemoSystem> sys;
  for (size_t d = 0; d < trajs.size(); ++d)
    sys.push_back(reduce_demo(trajs[d], weights, known, dyn, cfg.n_b > 0 ? sc.candidates[d]
                                                                          : std::vector<int>{},
                              cfg.dims, cfg.active_tol));
  double lam = 1.0;
  if (cfg.lambda_big_m > 0.0) {
    lam = cfg.lambda_big_m / 10.0;
  } else {
    for (const auto& v : free_fit(sys))
      if (v.size()) lam = std::max(lam, v.maxCoeff());
  }
  return assemble_program(trajs, sys, cfg, sc, scale, lam);
}

std::vector<BoxConstraint> decode_boxes(const ConstraintProgram& prog, const Vec& z) {
  std::vector<BoxConstraint> out;
  for (int b = 0; b < prog.n_b; ++b) {
    BoxConstraint box;
    box.kind = ConstraintKind::Exclusive;
    box.target = ConstraintTarget::State;
    box.dims = prog.dims;
    box.lb = Vec(prog.nd);
    box.ub = Vec(prog.nd);
    for (int i = 0; i < prog.nd; ++i) {
      box.lb(i) = z(prog.lb_index(b, i));
      box.ub(i) = z(prog.ub_index(b, i));
    }
    out.push_back(box);
  }
  return out;
}

std::vector<BoxConstraint> extract_constraints(const std::vector<Trajectory>& trajs,
                                               const CostWeights& weights,
                                               const std::vector<BoxConstraint>& known,
                                               const LinearDynamics& dyn,
                                               const ConstraintLearnConfig& cfg,
                                               const Segmentation* seg, ConstraintReport* report) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double scale = workspace_scale(trajs, known, cfg.dims);
  check_inputs(trajs, weights, dyn, cfg, scale);
  ConstraintReport rep;
  if (cfg.n_b == 0) {
    rep.status = MipStatus::Optimal;
    rep.converged = true;
    if (report) *report = rep;
    return {};
  }
  Segmentation own;
  if (!seg) {
    own = segment_demonstrations(trajs, known, dyn, cfg.segment);
    seg = &own;
  }
  if (seg->demos.size() != trajs.size()) throw ConfigError("segmentation does not match the demos");

  ProgramScope scope;
  for (const auto& d : seg->demos) scope.candidates.push_back(d.active);
  std::vector<DemoSystem> sys;
  for (size_t d = 0; d < trajs.size(); ++d)
    sys.push_back(reduce_demo(trajs[d], weights, known, dyn, scope.candidates[d], cfg.dims,
                              cfg.active_tol));
  const auto fit = free_fit(sys);
  double lam_max = 0.0;
  for (size_t d = 0; d < sys.size(); ++d)
    for (size_t c = 0; c < sys[d].box_cols.size(); ++c) lam_max = std::max(lam_max, fit[d](c));
  const double lambda_scale = cfg.lambda_big_m > 0.0 ? cfg.lambda_big_m / 10.0
                                                     : std::max(1.0, lam_max);

  // Starting assignment from the free fit.
  const int nd = static_cast<int>(cfg.dims.size());
  const double eps_geo = cfg.epsilon * scale;
  std::vector<Contact> contacts;
  for (size_t d = 0; d < sys.size(); ++d)
    for (size_t c = 0; c < sys[d].box_cols.size(); ++c)
      if (lam_max > 0.0 && fit[d](c) > cfg.contact_tol * lam_max)
        contacts.push_back({static_cast<int>(d), sys[d].box_cols[c].first,
                            sys[d].box_cols[c].second, fit[d](c)});
  auto groups = assign_contacts(contacts, trajs, cfg.dims, cfg.n_b, eps_geo,
                                std::abs(eps_geo) + 1e-7 * scale);

  std::map<std::tuple<int, int, int>, int> active;  // (demo, step, face) -> box
  for (size_t b = 0; b < groups.size(); ++b)
    for (const auto& c : groups[b].members) active[{c.demo, c.step, c.face}] = static_cast<int>(b);
  std::vector<BoxConstraint> hint_boxes;
  for (const auto& g : groups) {
    BoxConstraint b;
    b.dims = cfg.dims;
    b.lb = g.lb;
    b.ub = g.ub;
    hint_boxes.push_back(b);
  }

  std::vector<BoxConstraint> boxes;
  std::vector<int> support(cfg.n_b, 0);
  bool clean = false;
  MipSolution sol;
  for (int round = 0; round < cfg.max_pf_rounds; ++round) {
    rep.rounds = round + 1;
    const auto prog = assemble_program(trajs, sys, cfg, scope, scale, lambda_scale);
    Vec hint = Vec::Zero(prog.mip.base.n());
    for (const auto& cv : prog.contacts) {
      auto it = active.find({cv.demo, cv.step, cv.face});
      if (it != active.end() && it->second < prog.n_b) hint(cv.a[it->second]) = 1.0;
    }
    for (size_t e = 0; e < scope.pf.size(); ++e) {
      const auto& pr = scope.pf[e];
      if (pr.box >= static_cast<int>(hint_boxes.size())) {
        hint(prog.pf_binaries[e][0]) = 1.0;
        continue;
      }
      const auto& hb = hint_boxes[pr.box];
      const Vec w = trajs[pr.demo].x(pr.step);
      int best = 0;
      double bv = kInf;
      for (int f = 0; f < 2 * nd; ++f) {
        const double v = face_value(f, nd, cfg.dims, hb.lb, hb.ub, w);
        if (v < bv) {
          bv = v;
          best = f;
        }
      }
      hint(prog.pf_binaries[e][best]) = 1.0;
    }
    MipConfig mc = cfg.mip;
    mc.incumbent = hint;
    mc.objective_floor = prog.floor;
    if (cfg.mip.time_limit > 0.0) {
      mc.time_limit = cfg.mip.time_limit - elapsed();
      if (mc.time_limit <= 0.0) break;
    }
    sol = solve_mip(prog.mip, mc);
    rep.nodes += sol.nodes;
    rep.status = sol.status;
    if (!sol.has_incumbent) break;
    rep.objective = sol.objective + prog.constant;
    polish_boxes(prog, sol.z, cfg.mip.qp);
    boxes = decode_boxes(prog, sol.z);

    active.clear();
    std::fill(support.begin(), support.end(), 0);
    for (const auto& cv : prog.contacts)
      for (int b = 0; b < prog.n_b; ++b)
        if (sol.z(cv.a[b]) > 0.5) {
          active[{cv.demo, cv.step, cv.face}] = b;
          ++support[b];
        }
    hint_boxes = boxes;

    std::vector<PfPair> violated;
    for (size_t d = 0; d < trajs.size(); ++d)
      for (int k = 0; k < trajs[d].length(); ++k)
        for (int b = 0; b < prog.n_b; ++b)
          if (boxes[b].strictly_inside(trajs[d].x(k), 1e-7))
            violated.push_back({static_cast<int>(d), k, b});
    if (violated.empty()) {
      clean = true;
      break;
    }
    scope.pf.insert(scope.pf.end(), violated.begin(), violated.end());
  }
  if (boxes.empty()) {
    rep.seconds = elapsed();
    if (report) *report = rep;
    if (rep.status == MipStatus::Infeasible)
      throw MipInfeasible("constraint program infeasible; re-check the segmentation");
    throw SolverError(std::string("constraint program found no solution: ") + to_string(rep.status));
  }

  // Unsupported boxes collapse to a point outside the demo hull.
  Vec corner = Vec::Constant(nd, kInf);
  for (const auto& t : trajs)
    for (int k = 0; k < t.length(); ++k)
      for (int i = 0; i < nd; ++i) corner(i) = std::min(corner(i), t.x(k)(cfg.dims[i]));
  for (int b = 0; b < cfg.n_b; ++b)
    if (support[b] == 0) {
      boxes[b].lb = corner.array() - 1.0;
      boxes[b].ub = boxes[b].lb;
    }
  rep.converged = clean && rep.status == MipStatus::Optimal;
  rep.supported = support;
  rep.seconds = elapsed();
  if (report) *report = rep;
  return boxes;
}

std::vector<BoxConstraint> merge_boxes(const std::vector<BoxConstraint>& boxes) {
  const int n = static_cast<int>(boxes.size());
  if (n == 0) return {};
  for (const auto& b : boxes)
    if (b.dims != boxes[0].dims || b.target != boxes[0].target)
      throw ConfigError("merge_boxes needs boxes with equal target and dims");
  auto overlap = [](const BoxConstraint& a, const BoxConstraint& b) {
    for (int i = 0; i < a.nw(); ++i)
      if (std::min(a.ub(i), b.ub(i)) - std::max(a.lb(i), b.lb(i)) <= 0.0) return false;
    return true;
  };
  auto contains = [](const BoxConstraint& a, const BoxConstraint& b) {
    for (int i = 0; i < a.nw(); ++i)
      if (b.lb(i) < a.lb(i) || b.ub(i) > a.ub(i)) return false;
    return true;
  };
  // Components under positive-area overlap; degenerate boxes inside another box are dropped.
  std::vector<int> comp(n);
  for (int i = 0; i < n; ++i) comp[i] = i;
  std::function<int(int)> root = [&](int i) { return comp[i] == i ? i : comp[i] = root(comp[i]); };
  std::vector<char> drop(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (boxes[i].area() == 0.0 && contains(boxes[j], boxes[i]) &&
          (boxes[j].area() > 0.0 || j < i))
        drop[i] = 1;
      if (j > i && overlap(boxes[i], boxes[j])) comp[root(j)] = root(i);
    }
  std::vector<BoxConstraint> out;
  std::map<int, std::vector<int>> members;
  for (int i = 0; i < n; ++i)
    if (!drop[i]) members[root(i)].push_back(i);
  for (const auto& [r, idx] : members) {
    if (idx.size() == 1 || boxes[idx[0]].nw() != 2) {
      for (int i : idx) out.push_back(boxes[i]);
      continue;
    }
    // Vertical slabs, then slabs with equal y-intervals are joined.
    std::vector<double> xs;
    for (int i : idx) {
      xs.push_back(boxes[i].lb(0));
      xs.push_back(boxes[i].ub(0));
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<BoxConstraint> open;
    for (size_t s = 0; s + 1 < xs.size(); ++s) {
      const double x0 = xs[s], x1 = xs[s + 1];
      std::vector<std::pair<double, double>> iv;
      for (int i : idx)
        if (boxes[i].lb(0) <= x0 && boxes[i].ub(0) >= x1) iv.push_back({boxes[i].lb(1), boxes[i].ub(1)});
      std::sort(iv.begin(), iv.end());
      std::vector<std::pair<double, double>> merged;
      for (const auto& v : iv) {
        if (!merged.empty() && v.first <= merged.back().second)
          merged.back().second = std::max(merged.back().second, v.second);
        else
          merged.push_back(v);
      }
      std::vector<BoxConstraint> next;
      for (const auto& [y0, y1] : merged) {
        auto it = std::find_if(open.begin(), open.end(), [&](const BoxConstraint& b) {
          return b.ub(0) == x0 && b.lb(1) == y0 && b.ub(1) == y1;
        });
        if (it != open.end()) {
          BoxConstraint b = *it;
          b.ub(0) = x1;
          open.erase(it);
          next.push_back(b);
        } else {
          BoxConstraint b = boxes[idx[0]];
          b.lb(0) = x0;
          b.ub(0) = x1;
          b.lb(1) = y0;
          b.ub(1) = y1;
          next.push_back(b);
        }
      }
      for (auto& b : open) out.push_back(b);
      open = std::move(next);
    }
    for (auto& b : open) out.push_back(b);
  }
  return out;
}

}  // namespace ikkt
