#include "ikkt/demogen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ikkt {

Trajectory rollout(const LinearDynamics& dyn, const Vec& x0, const Mat& controls) {
  const int N = static_cast<int>(controls.rows()) + 1;
  Trajectory t;
  t.states = Mat(N, dyn.nx());
  t.controls = controls;
  t.states.row(0) = x0.transpose();
  for (int k = 0; k + 1 < N; ++k)
    t.states.row(k + 1) = (dyn.A * t.x(k) + dyn.B * t.u(k)).transpose();
  return t;
}

const char* to_string(ForwardStatus s) {
  switch (s) {
    case ForwardStatus::Optimal: return "Optimal";
    case ForwardStatus::LocallyOptimal: return "LocallyOptimal";
    case ForwardStatus::Infeasible: return "Infeasible";
    case ForwardStatus::SolverFailure: return "SolverFailure";
  }
  return "?";
}

namespace {

struct RowRef {
  int step;
  int con;  // index into the full constraint list
  int row;  // row within the constraint
};

// Controls are the decision variables; x_k = c_k + S_k U.
class Condensed {
 public:
  Condensed(const LinearDynamics& dyn, const Endpoint& ep, const CostWeights& w, int N,
            const std::vector<BoxConstraint>& cons)
      : dyn_(dyn), ep_(ep), N_(N), cons_(cons) {
    const int nx = dyn.nx(), nu = dyn.nu();
    n_ = nu * (N - 1);
    S_.assign(N, Mat::Zero(nx, n_));
    c_.assign(N, Vec::Zero(nx));
    c_[0] = ep.start;
    for (int k = 1; k < N; ++k) {
      S_[k] = dyn.A * S_[k - 1];
      S_[k].middleCols((k - 1) * nu, nu) += dyn.B;
      c_[k] = dyn.A * c_[k - 1];
    }
    base_ = QuadraticProgram::with_size(n_);
    const Mat Q = w.q.asDiagonal();
    for (int k = 0; k < N; ++k) {
      base_.P.noalias() += S_[k].transpose() * Q * S_[k];
      base_.q.noalias() += S_[k].transpose() * (Q * c_[k]);
    }
    for (int k = 0; k + 1 < N; ++k)
      base_.P.block(k * nu, k * nu, nu, nu) += Mat(w.r.asDiagonal());
    base_.P = 0.5 * (base_.P + base_.P.transpose());
    base_.Aeq = S_[N - 1];
    base_.beq = ep.goal - c_[N - 1];

    std::vector<Vec> rows;
    std::vector<double> rhs;
    for (size_t ci = 0; ci < cons.size(); ++ci) {
      const auto& b = cons[ci];
      if (b.kind != ConstraintKind::Inclusive) continue;
      if (b.target == ConstraintTarget::State) {
        for (int k = 1; k + 1 < N; ++k)
          for (int r = 0; r < b.rows(); ++r) add_state_row(k, static_cast<int>(ci), r, rows, rhs, known_rows_);
      } else {
        for (int k = 0; k + 1 < N; ++k)
          for (int r = 0; r < b.rows(); ++r) {
            const int d = b.dims[r % b.nw()];
            const double s = b.row_sign(r);
            Vec a = Vec::Zero(n_);
            a(k * nu + d) = s;
            const double bound = r < b.nw() ? b.lb(r) : b.ub(r - b.nw());
            rows.push_back(a);
            rhs.push_back(s * bound);
            known_rows_.push_back({k, static_cast<int>(ci), r});
          }
      }
    }
    known_G_ = Mat(rows.size(), n_);
    known_h_ = Vec(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      known_G_.row(i) = rows[i];
      known_h_(i) = rhs[i];
    }
  }

  int n() const { return n_; }
  const QuadraticProgram& base() const { return base_; }
  Vec state(int k, const Vec& U) const { return c_[k] + S_[k] * U; }

  // Row a'U <= h realizing "constraint row r of cons[ci] at step k is <= 0".
  void state_row(int k, int ci, int r, Vec& a, double& h) const {
    const auto& b = cons_[ci];
    const int i = r % b.nw();
    const int d = b.dims[i];
    const double s = b.row_sign(r);
    const double bound = r < b.nw() ? b.lb(i) : b.ub(i);
    // row value = s * (x_d - bound)
    a = s * S_[k].row(d).transpose();
    h = s * bound - s * c_[k](d);
  }

  // QP with known rows plus the given exclusive halfspaces.
  QuadraticProgram with_rows(const std::vector<RowRef>& extra, std::vector<RowRef>& all_rows) const {
    QuadraticProgram p = base_;
    const int m = static_cast<int>(known_rows_.size() + extra.size());
    p.Gin = Mat(m, n_);
    p.hin = Vec(m);
    if (!known_rows_.empty()) {
      p.Gin.topRows(known_G_.rows()) = known_G_;
      p.hin.head(known_h_.size()) = known_h_;
    }
    all_rows = known_rows_;
    int i = static_cast<int>(known_rows_.size());
    for (const auto& rr : extra) {
      Vec a;
      double h;
      state_row(rr.step, rr.con, rr.row, a, h);
      p.Gin.row(i) = a.transpose();
      p.hin(i++) = h;
      all_rows.push_back(rr);
    }
    return p;
  }

  ForwardResult assemble(const QpSolution& sol, const std::vector<RowRef>& rows, const CostWeights& w) const {
    ForwardResult res;
    res.constraints = cons_;
    const int nx = dyn_.nx(), nu = dyn_.nu();
    Mat U(N_ - 1, nu);
    for (int k = 0; k + 1 < N_; ++k) U.row(k) = sol.z.segment(k * nu, nu).transpose();
    res.traj = rollout(dyn_, ep_.start, U);
    std::vector<int> offx, offu;
    int rx = 0, ru = 0;
    for (const auto& b : cons_) {
      offx.push_back(b.target == ConstraintTarget::State ? rx : -1);
      offu.push_back(b.target == ConstraintTarget::Control ? ru : -1);
      (b.target == ConstraintTarget::State ? rx : ru) += b.rows();
    }
    res.mult = Multipliers::zeros(N_, nx, rx, ru);
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto& rr = rows[i];
      const double lam = std::max(0.0, sol.ineq_multipliers(i));
      const auto& b = cons_[rr.con];
      if (b.target == ConstraintTarget::State)
        res.mult.lambda_x[rr.step](offx[rr.con] + rr.row) += lam;
      else
        res.mult.lambda_u[rr.step](offu[rr.con] + rr.row) += lam;
    }
    auto lambda_term_x = [&](int k) {
      Vec t = Vec::Zero(nx);
      for (size_t ci = 0; ci < cons_.size(); ++ci) {
        const auto& b = cons_[ci];
        if (b.target != ConstraintTarget::State) continue;
        for (int r = 0; r < b.rows(); ++r)
          t(b.dims[r % b.nw()]) += b.row_sign(r) * res.mult.lambda_x[k](offx[ci] + r);
      }
      return t;
    };
    const Mat Q = w.q.asDiagonal();
    res.mult.theta_g = sol.eq_multipliers;
    const int last = N_ - 1;
    res.mult.theta_d[last - 1] = -(Q * res.traj.x(last)) - lambda_term_x(last) - res.mult.theta_g;
    for (int k = last - 1; k >= 1; --k)
      res.mult.theta_d[k - 1] =
          dyn_.A.transpose() * res.mult.theta_d[k] - Q * res.traj.x(k) - lambda_term_x(k);
    res.mult.theta_s = dyn_.A.transpose() * res.mult.theta_d[0] - Q * res.traj.x(0) - lambda_term_x(0);
    res.objective = sol.objective;
    for (int k = 0; k < N_; ++k) res.objective += 0.5 * c_[k].dot(Q * c_[k]);
    return res;
  }

 private:
  void add_state_row(int k, int ci, int r, std::vector<Vec>& rows, std::vector<double>& rhs,
                     std::vector<RowRef>& refs) const {
    Vec a;
    double h;
    state_row(k, ci, r, a, h);
    rows.push_back(a);
    rhs.push_back(h);
    refs.push_back({k, ci, r});
  }

  const LinearDynamics& dyn_;
  const Endpoint& ep_;
  int N_;
  const std::vector<BoxConstraint>& cons_;
  int n_ = 0;
  std::vector<Mat> S_;
  std::vector<Vec> c_;
  QuadraticProgram base_;
  std::vector<RowRef> known_rows_;
  Mat known_G_;
  Vec known_h_;
};

// side[k][box] = exclusive row index (0..2nw-1) enforced at step k.
using Pattern = std::vector<std::vector<int>>;

int best_side(const BoxConstraint& b, const Vec& x, int current) {
  const Vec e = b.row_values(x);
  int best = current >= 0 ? current : 0;
  double margin = -e(best);
  for (int r = 0; r < e.size(); ++r)
    if (-e(r) > margin + 1e-12) {
      margin = -e(r);
      best = r;
    }
  return best;
}

double scenario_big_m(const Endpoint& ep, const std::vector<BoxConstraint>& cons) {
  double m = std::max(ep.start.head(2).cwiseAbs().maxCoeff(), ep.goal.head(2).cwiseAbs().maxCoeff());
  for (const auto& b : cons)
    if (b.target == ConstraintTarget::State && b.kind == ConstraintKind::Exclusive)
      m = std::max({m, b.lb.cwiseAbs().maxCoeff(), b.ub.cwiseAbs().maxCoeff()});
  return 10.0 * std::max(1.0, m);
}

}  // namespace

ForwardResult solve_forward_convex(const LinearDynamics& dyn, const Endpoint& ep,
                                   const std::vector<BoxConstraint>& known, const CostWeights& w,
                                   int N) {
  Condensed cp(dyn, ep, w, N, known);
  std::vector<RowRef> rows;
  const auto p = cp.with_rows({}, rows);
  const auto sol = solve_qp(p);
  if (sol.status != QpStatus::Optimal) {
    ForwardResult r;
    r.status = sol.status == QpStatus::Infeasible ? ForwardStatus::Infeasible : ForwardStatus::SolverFailure;
    r.message = std::string("qp ") + to_string(sol.status);
    return r;
  }
  auto res = cp.assemble(sol, rows, w);
  res.status = ForwardStatus::Optimal;
  return res;
}

ForwardResult solve_forward(const Scenario& s, int endpoint_index, const CostWeights& w, int N,
                            const ForwardConfig& cfg) {
  const auto& ep = s.endpoints.at(endpoint_index);
  std::vector<BoxConstraint> cons = s.known_constraints;
  std::vector<int> boxes;
  for (const auto& b : s.unknown_constraints_truth) {
    if (b.kind == ConstraintKind::Exclusive && b.target == ConstraintTarget::State)
      boxes.push_back(static_cast<int>(cons.size()));
    cons.push_back(b);
  }
  ForwardResult fail;
  fail.status = ForwardStatus::Infeasible;
  for (int bi : boxes)
    for (const Vec* p : {&ep.start, &ep.goal})
      if (cons[bi].strictly_inside(*p)) {
        fail.message = "endpoint inside exclusive region";
        return fail;
      }
  for (const auto& b : s.known_constraints)
    if (b.target == ConstraintTarget::State)
      for (const Vec* p : {&ep.start, &ep.goal})
        if (b.row_values(*p).maxCoeff() > 1e-12) {
          fail.message = "endpoint outside inclusive bounds";
          return fail;
        }

  Condensed cp(s.dynamics, ep, w, N, cons);
  auto solve_pattern = [&](const Pattern& pat, std::vector<RowRef>& rows) {
    std::vector<RowRef> extra;
    for (int k = 1; k + 1 < N; ++k)
      for (size_t b = 0; b < boxes.size(); ++b) extra.push_back({k, boxes[b], pat[k][b]});
    return solve_qp(cp.with_rows(extra, rows));
  };

  std::vector<RowRef> rows0;
  const auto free_sol = solve_qp(cp.with_rows({}, rows0));
  if (free_sol.status != QpStatus::Optimal) {
    fail.status = free_sol.status == QpStatus::Infeasible ? ForwardStatus::Infeasible
                                                          : ForwardStatus::SolverFailure;
    fail.message = std::string("qp ") + to_string(free_sol.status);
    return fail;
  }
  if (boxes.empty()) {
    auto res = cp.assemble(free_sol, rows0, w);
    res.status = ForwardStatus::Optimal;
    return res;
  }

  // Starting patterns: outside-margin choice, then each box's interior points pushed to each face.
  std::vector<Pattern> starts;
  Pattern p0(N, std::vector<int>(boxes.size(), 0));
  for (int k = 1; k + 1 < N; ++k)
    for (size_t b = 0; b < boxes.size(); ++b) p0[k][b] = best_side(cons[boxes[b]], cp.state(k, free_sol.z), -1);
  starts.push_back(p0);
  for (size_t b = 0; b < boxes.size(); ++b) {
    const auto& box = cons[boxes[b]];
    for (int face = 0; face < box.rows(); ++face) {
      Pattern p = p0;
      bool changed = false;
      for (int k = 1; k + 1 < N; ++k)
        if (box.strictly_inside(cp.state(k, free_sol.z)) && p[k][b] != face) {
          p[k][b] = face;
          changed = true;
        }
      if (changed) starts.push_back(p);
    }
  }
  for (int face = 0; face < 4; ++face) {
    Pattern p = p0;
    bool changed = false;
    for (int k = 1; k + 1 < N; ++k)
      for (size_t b = 0; b < boxes.size(); ++b) {
        const auto& box = cons[boxes[b]];
        if (face < box.rows() && box.strictly_inside(cp.state(k, free_sol.z)) && p[k][b] != face) {
          p[k][b] = face;
          changed = true;
        }
      }
    if (changed) starts.push_back(p);
  }

  bool have = false;
  QpSolution best;
  std::vector<RowRef> best_rows;
  Pattern best_pat;
  for (const auto& start : starts) {
    Pattern pat = start;
    QpSolution sol;
    std::vector<RowRef> rows;
    bool ok = false;
    for (int round = 0; round < cfg.max_rounds; ++round) {
      sol = solve_pattern(pat, rows);
      if (sol.status != QpStatus::Optimal) break;
      ok = true;
      bool changed = false;
      for (int k = 1; k + 1 < N; ++k)
        for (size_t b = 0; b < boxes.size(); ++b) {
          const int side = best_side(cons[boxes[b]], cp.state(k, sol.z), pat[k][b]);
          if (side != pat[k][b]) {
            pat[k][b] = side;
            changed = true;
          }
        }
      if (!changed) break;
    }
    if (ok && (!have || sol.objective < best.objective - 1e-9)) {
      have = true;
      best = sol;
      best_rows = rows;
      best_pat = pat;
    }
  }
  if (!have) {
    fail.message = "no feasible side pattern found";
    return fail;
  }

  ForwardStatus status = ForwardStatus::LocallyOptimal;
  if (cfg.exact) {
    const double M = cfg.big_m > 0.0 ? cfg.big_m : scenario_big_m(ep, cons);
    const int n = cp.n();
    std::vector<std::array<int, 3>> bins;  // step, box slot, row
    for (int k = 1; k + 1 < N; ++k)
      for (size_t b = 0; b < boxes.size(); ++b)
        for (int r = 0; r < cons[boxes[b]].rows(); ++r) bins.push_back({k, static_cast<int>(b), r});
    MixedBinaryProgram mp;
    std::vector<RowRef> krows;
    QuadraticProgram base = cp.with_rows({}, krows);
    const int nb = static_cast<int>(bins.size());
    const int m0 = static_cast<int>(base.Gin.rows());
    mp.base = QuadraticProgram::with_size(n + nb);
    mp.base.P.topLeftCorner(n, n) = base.P;
    mp.base.q.head(n) = base.q;
    mp.base.Aeq = Mat::Zero(base.Aeq.rows(), n + nb);
    mp.base.Aeq.leftCols(n) = base.Aeq;
    mp.base.beq = base.beq;
    mp.base.Gin = Mat::Zero(m0 + nb, n + nb);
    mp.base.hin = Vec(m0 + nb);
    if (m0) {
      mp.base.Gin.topLeftCorner(m0, n) = base.Gin;
      mp.base.hin.head(m0) = base.hin;
    }
    std::map<std::pair<int, int>, std::vector<int>> groups;
    for (int i = 0; i < nb; ++i) {
      const auto [k, b, r] = bins[i];
      Vec a;
      double h;
      cp.state_row(k, boxes[b], r, a, h);
      mp.base.Gin.row(m0 + i).head(n) = a.transpose();
      mp.base.Gin(m0 + i, n + i) = M;
      mp.base.hin(m0 + i) = h + M;
      mp.binary_indices.push_back(n + i);
      groups[{k, b}].push_back(n + i);
    }
    for (auto& [key, g] : groups) mp.cardinality_groups.push_back(g);
    Vec inc = Vec::Zero(n + nb);
    inc.head(n) = best.z;
    for (int i = 0; i < nb; ++i) {
      const auto [k, b, r] = bins[i];
      inc(n + i) = best_pat[k][b] == r ? 1.0 : 0.0;
    }
    MipConfig mc = cfg.mip;
    mc.incumbent = inc;
    const auto ms = solve_mip(mp, mc);
    if (ms.has_incumbent && ms.objective < best.objective - 1e-9) {
      Pattern pat = best_pat;
      std::map<std::pair<int, int>, bool> set;
      for (int i = 0; i < nb; ++i) {
        const auto [k, b, r] = bins[i];
        if (ms.binaries[i] == 1 && !set[{k, b}]) {
          pat[k][b] = r;
          set[{k, b}] = true;
        }
      }
      std::vector<RowRef> rows;
      auto sol = solve_pattern(pat, rows);
      if (sol.status == QpStatus::Optimal) {
        best = sol;
        best_rows = rows;
        best_pat = pat;
      }
    }
    if (ms.status == MipStatus::Optimal) status = ForwardStatus::Optimal;
  }
  auto res = cp.assemble(best, best_rows, w);
  res.status = status;
  return res;
}

std::vector<BoxConstraint> default_known_bounds(int axes, double vmax, double umax) {
  std::vector<int> vdims, udims;
  for (int a = 0; a < axes; ++a) {
    vdims.push_back(axes + a);
    udims.push_back(a);
  }
  return {make_bound(ConstraintTarget::State, vdims, vmax),
          make_bound(ConstraintTarget::Control, udims, umax)};
}

CostWeights default_truth_weights() {
  CostWeights w;
  w.q = Vec(4);
  w.q << 0.05, 0.05, 0.45, 0.45;
  w.r = Vec::Constant(2, 1e5);
  return w;
}

namespace {

Vec rest(double x, double y) {
  Vec v(4);
  v << x, y, 0.0, 0.0;
  return v;
}

Scenario make(const std::string& name, std::vector<BoxConstraint> boxes,
              std::vector<std::array<double, 4>> eps) {
  Scenario s;
  s.name = name;
  s.dynamics = LinearDynamics::free_floating(1.0);
  s.known_constraints = default_known_bounds();
  s.unknown_constraints_truth = std::move(boxes);
  for (const auto& e : eps) s.endpoints.push_back({rest(e[0], e[1]), rest(e[2], e[3])});
  s.horizon = 50;
  s.weights_truth = default_truth_weights();
  return s;
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> v;
  v.push_back(make("a", {make_obstacle(40, 40, 60, 60)}, {{10, 50, 70, 35}, {10, 90, 70, 35}}));
  v.push_back(make("b", {make_obstacle(40, 40, 60, 60), make_obstacle(25, 70, 35, 80)},
                   {{10, 65, 70, 35}, {10, 90, 70, 45}, {5, 70, 70, 30}, {0, 80, 80, 50}}));
  v.push_back(make("c", {make_obstacle(10, 10, 30, 30), make_obstacle(50, 50, 70, 70)},
                   {{5, 2, 90, 90}, {5, 20, 90, 90}, {5, 20, 90, 70}, {5, 2, 90, 70}}));
  v.push_back(make("d",
                   {make_obstacle(10, 10, 30, 30), make_obstacle(45, 45, 75, 75),
                    make_obstacle(31.5, 64.5, 38.5, 71.5)},
                   {{5, 5, 90, 80}, {5, 20, 90, 80}, {20, 50, 90, 80}}));
  // Stand-ins with the catalog's (n_b, L) for e..h.
  v.push_back(make("e", {make_obstacle(20, 30, 40, 50), make_obstacle(55, 50, 75, 70)},
                   {{5, 40, 90, 60}, {5, 55, 90, 45}, {30, 5, 65, 90}, {10, 20, 85, 80},
                    {45, 10, 50, 90}}));
  v.push_back(make("f", {make_obstacle(15, 55, 35, 75), make_obstacle(55, 15, 75, 35)},
                   {{5, 50, 50, 95}, {10, 45, 55, 90}, {45, 5, 90, 50}, {60, 5, 90, 40},
                    {5, 95, 95, 5}, {10, 80, 80, 10}}));
  v.push_back(make("g",
                   {make_obstacle(15, 55, 35, 75), make_obstacle(55, 15, 75, 35),
                    make_obstacle(55, 55, 75, 75)},
                   {{5, 50, 50, 95}, {10, 45, 95, 90}, {45, 5, 90, 95}, {60, 5, 90, 40}}));
  v.push_back(make("h", {make_obstacle(63, 24, 79, 40), make_obstacle(18, 44, 36, 65)},
                   {{67, 94, 81, 19}, {4, 82, 91, 8}, {31, 3, 54, 81}, {64, 18, 3, 59}}));
  return v;
}

Scenario builtin_scenario(const std::string& name) {
  for (auto& s : builtin_scenarios())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown builtin scenario: " + name);
}

}  // namespace ikkt
