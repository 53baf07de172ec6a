#include "ikkt/model.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace ikkt {

LinearDynamics LinearDynamics::free_floating(double dt, int axes) {
  LinearDynamics d;
  const int nx = 2 * axes;
  d.dt = dt;
  d.A = Mat::Identity(nx, nx);
  d.B = Mat::Zero(nx, axes);
  for (int a = 0; a < axes; ++a) {
    d.A(a, axes + a) = dt;
    d.B(a, a) = 0.5 * dt * dt;
    d.B(axes + a, a) = dt;
  }
  derive_axis_map(d);
  return d;
}

void derive_axis_map(LinearDynamics& dyn) {
  if (static_cast<int>(dyn.axis_map.size()) == dyn.nx()) return;
  dyn.axis_map.assign(dyn.nx(), 0);
  for (int i = 0; i < dyn.nx(); ++i) {
    int best = 0;
    double mag = -1.0;
    for (int j = 0; j < dyn.nu(); ++j) {
      if (std::abs(dyn.B(i, j)) > mag + 1e-15) {
        mag = std::abs(dyn.B(i, j));
        best = j;
      }
    }
    dyn.axis_map[i] = best;
  }
}

std::string check_weights(const CostWeights& w, double r_min) {
  std::ostringstream os;
  for (int i = 0; i < w.q.size(); ++i)
    if (!(w.q(i) >= 0.0)) os << "q[" << i << "] negative; ";
  if (w.q.size() > 0 && std::abs(w.q.sum() - 1.0) > 1e-9) os << "trace(Q) != 1; ";
  for (int i = 0; i < w.r.size(); ++i)
    if (!(w.r(i) >= r_min)) os << "r[" << i << "] below r_min; ";
  return os.str();
}

Vec BoxConstraint::row_values(const Vec& w) const {
  const int n = nw();
  Vec g(2 * n);
  for (int i = 0; i < n; ++i) {
    const double wi = w(dims[i]);
    if (kind == ConstraintKind::Inclusive) {
      g(i) = lb(i) - wi;
      g(n + i) = wi - ub(i);
    } else {
      g(i) = wi - lb(i);
      g(n + i) = ub(i) - wi;
    }
  }
  return g;
}

double BoxConstraint::row_sign(int r) const {
  const bool lower = r < nw();
  if (kind == ConstraintKind::Inclusive) return lower ? -1.0 : 1.0;
  return lower ? 1.0 : -1.0;
}

bool BoxConstraint::strictly_inside(const Vec& w, double margin) const {
  for (int i = 0; i < nw(); ++i) {
    const double wi = w(dims[i]);
    if (!(wi > lb(i) + margin && wi < ub(i) - margin)) return false;
  }
  return true;
}

double BoxConstraint::area() const {
  double a = 1.0;
  for (int i = 0; i < nw(); ++i) a *= std::max(0.0, ub(i) - lb(i));
  return a;
}

BoxConstraint make_obstacle(double x0, double y0, double x1, double y1) {
  BoxConstraint b;
  b.kind = ConstraintKind::Exclusive;
  b.target = ConstraintTarget::State;
  b.dims = {0, 1};
  b.lb = Vec(2);
  b.ub = Vec(2);
  b.lb << x0, y0;
  b.ub << x1, y1;
  return b;
}

BoxConstraint make_bound(ConstraintTarget target, std::vector<int> dims, double limit) {
  BoxConstraint b;
  b.kind = ConstraintKind::Inclusive;
  b.target = target;
  b.dims = std::move(dims);
  b.lb = Vec::Constant(b.nw(), -limit);
  b.ub = Vec::Constant(b.nw(), limit);
  return b;
}

std::vector<int> SelectorVectors::vdx() const {
  std::vector<int> v(vsx);
  v.insert(v.end(), vsx.begin(), vsx.end());
  return v;
}

std::vector<int> SelectorVectors::vdu() const {
  std::vector<int> v(vsu);
  v.insert(v.end(), vsu.begin(), vsu.end());
  return v;
}

SelectorVectors SelectorVectors::all(int ncx, int ncu, int value) {
  SelectorVectors s;
  s.vpx.assign(ncx, value);
  s.vsx.assign(ncx, value);
  s.vpu.assign(ncu, value);
  s.vsu.assign(ncu, value);
  return s;
}

int ConstraintSet::state_rows() const {
  int n = 0;
  for (const auto& c : state) n += c.rows();
  return n;
}

int ConstraintSet::control_rows() const {
  int n = 0;
  for (const auto& c : control) n += c.rows();
  return n;
}

ConstraintSet ConstraintSet::split(const std::vector<BoxConstraint>& boxes) {
  ConstraintSet cs;
  for (const auto& b : boxes)
    (b.target == ConstraintTarget::State ? cs.state : cs.control).push_back(b);
  return cs;
}

namespace {

void check_box(const BoxConstraint& b, int dim, const std::string& tag, ValidationReport& rep) {
  if (b.lb.size() != b.nw() || b.ub.size() != b.nw()) {
    rep.issues.push_back(tag + ": bound length does not match dims");
    return;
  }
  std::set<int> seen;
  for (int d : b.dims) {
    if (d < 0 || d >= dim) rep.issues.push_back(tag + ": dim out of range");
    if (!seen.insert(d).second) rep.issues.push_back(tag + ": duplicate dim");
  }
  for (int i = 0; i < b.nw(); ++i)
    if (b.lb(i) > b.ub(i)) rep.issues.push_back(tag + ": lb>ub");
}

}  // namespace

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport rep;
  const auto& d = s.dynamics;
  const int nx = d.nx(), nu = d.nu();
  if (d.A.rows() != d.A.cols()) rep.issues.push_back("A is not square");
  if (d.B.rows() != d.A.rows()) rep.issues.push_back("B row count does not match A");
  if (nx == 0 || nu == 0) rep.issues.push_back("empty dynamics");
  if (!(d.dt > 0.0)) rep.issues.push_back("dt must be positive");
  if (s.horizon < 3) rep.issues.push_back("horizon below 3");
  if (s.endpoints.empty()) rep.issues.push_back("no endpoints");

  auto check_all = [&](const std::vector<BoxConstraint>& boxes, const std::string& what) {
    for (size_t i = 0; i < boxes.size(); ++i) {
      const auto& b = boxes[i];
      const int dim = b.target == ConstraintTarget::State ? nx : nu;
      check_box(b, dim, what + "[" + std::to_string(i) + "]", rep);
    }
  };
  check_all(s.known_constraints, "known");
  check_all(s.unknown_constraints_truth, "truth");

  for (size_t e = 0; e < s.endpoints.size(); ++e) {
    const auto& ep = s.endpoints[e];
    const std::string tag = "endpoint[" + std::to_string(e) + "]";
    if (ep.start.size() != nx || ep.goal.size() != nx) {
      rep.issues.push_back(tag + ": dimension mismatch");
      continue;
    }
    for (const auto* set : {&s.known_constraints, &s.unknown_constraints_truth}) {
      for (const auto& b : *set) {
        if (b.target != ConstraintTarget::State || b.lb.size() != b.nw()) continue;
        for (const Vec* p : {&ep.start, &ep.goal}) {
          bool bad_dim = false;
          for (int dd : b.dims) bad_dim |= dd < 0 || dd >= nx;
          if (bad_dim) continue;
          if (b.kind == ConstraintKind::Exclusive && b.strictly_inside(*p))
            rep.issues.push_back(tag + ": endpoint inside exclusive region");
          if (b.kind == ConstraintKind::Inclusive && b.row_values(*p).maxCoeff() > 0.0)
            rep.issues.push_back(tag + ": endpoint outside inclusive bounds");
        }
      }
    }
  }
  if (s.weights_truth) {
    const auto& w = *s.weights_truth;
    if (w.q.size() != nx || w.r.size() != nu)
      rep.issues.push_back("truth weights dimension mismatch");
    else if (auto msg = check_weights(w); !msg.empty())
      rep.issues.push_back("truth weights: " + msg);
  }
  return rep;
}

std::string check_trajectory(const Trajectory& t, const LinearDynamics& dyn) {
  if (t.length() < 3) return "trajectory shorter than 3 steps";
  if (t.states.cols() != dyn.nx()) return "state dimension mismatch";
  if (t.controls.rows() != t.length() - 1) return "control count must be N-1";
  if (t.controls.cols() != dyn.nu()) return "control dimension mismatch";
  return {};
}

}  // namespace ikkt
