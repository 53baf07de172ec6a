#include "ikkt/mip.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <thread>

namespace ikkt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Node {
  long id = 0;
  double bound = -kInf;
  std::vector<signed char> fixed;  // per binary: -1 free, 0, 1
  std::shared_ptr<const Vec> warm_z;
  std::shared_ptr<const QpBasis> warm_basis;
};

struct Evaluated {
  bool infeasible = false;
  bool failed = false;
  QpSolution sol;
};

// Fixed variables substituted out; rows left with at most one free variable become bounds.
struct Reduced {
  bool infeasible = false;
  QuadraticProgram qp;
  std::vector<int> cols;      // reduced -> original variable
  std::vector<int> eq_rows;   // reduced -> original row
  std::vector<int> in_rows;
  Vec fixed_z;                // full vector holding the fixed values
};

Reduced reduce(const QuadraticProgram& p, double tol) {
  const int n = p.n();
  Reduced r;
  Vec lo = p.lo, hi = p.hi;
  std::vector<char> fixed(n, 0), eq_drop(p.Aeq.rows(), 0), in_drop(p.Gin.rows(), 0);
  r.fixed_z = Vec::Zero(n);
  auto fix = [&](int j, double v) {
    fixed[j] = 1;
    r.fixed_z(j) = v;
  };
  for (int j = 0; j < n; ++j)
    if (lo(j) == hi(j)) fix(j, lo(j));

  // Returns false on a violated row. side: +1 for <=, 0 for ==.
  auto scan = [&](const Mat& A, const Vec& b, int i, int side, std::vector<char>& drop) {
    double rest = b(i), mag = std::abs(b(i));
    int free_j = -1, count = 0;
    for (int j = 0; j < n; ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      if (fixed[j]) {
        rest -= a * r.fixed_z(j);
        mag = std::max(mag, std::abs(a * r.fixed_z(j)));
      } else {
        free_j = j;
        ++count;
      }
    }
    if (count > 1) return true;
    const double t = tol * std::max(1.0, mag);
    if (count == 0) {
      drop[i] = 1;
      return side == 0 ? std::abs(rest) <= t : rest >= -t;
    }
    const double a = A(i, free_j), v = rest / a;
    drop[i] = 1;
    if (side == 0) {
      if (v < lo(free_j) - t || v > hi(free_j) + t) return false;
      lo(free_j) = hi(free_j) = std::clamp(v, lo(free_j), hi(free_j));
    } else if (a > 0.0) {
      hi(free_j) = std::min(hi(free_j), v);
    } else {
      lo(free_j) = std::max(lo(free_j), v);
    }
    if (lo(free_j) > hi(free_j) + t) return false;
    if (lo(free_j) >= hi(free_j)) {
      const double m = 0.5 * (lo(free_j) + hi(free_j));
      lo(free_j) = hi(free_j) = m;
      fix(free_j, m);
    }
    return true;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < p.Aeq.rows(); ++i)
      if (!eq_drop[i]) {
        if (!scan(p.Aeq, p.beq, i, 0, eq_drop)) {
          r.infeasible = true;
          return r;
        }
        changed |= eq_drop[i] != 0;
      }
    for (int i = 0; i < p.Gin.rows(); ++i)
      if (!in_drop[i]) {
        if (!scan(p.Gin, p.hin, i, 1, in_drop)) {
          r.infeasible = true;
          return r;
        }
        changed |= in_drop[i] != 0;
      }
  }

  for (int j = 0; j < n; ++j)
    if (!fixed[j]) r.cols.push_back(j);
  for (int i = 0; i < p.Aeq.rows(); ++i)
    if (!eq_drop[i]) r.eq_rows.push_back(i);
  for (int i = 0; i < p.Gin.rows(); ++i)
    if (!in_drop[i]) r.in_rows.push_back(i);
  const int nf = static_cast<int>(r.cols.size());
  auto& q = r.qp;
  q = QuadraticProgram::with_size(nf);
  const Vec Pz = p.P * r.fixed_z;
  for (int a = 0; a < nf; ++a) {
    q.q(a) = p.q(r.cols[a]) + Pz(r.cols[a]);
    q.lo(a) = lo(r.cols[a]);
    q.hi(a) = hi(r.cols[a]);
    for (int b = 0; b < nf; ++b) q.P(a, b) = p.P(r.cols[a], r.cols[b]);
  }
  auto rows = [&](const Mat& A, const Vec& b, const std::vector<int>& keep, Mat& Ao, Vec& bo) {
    Ao.resize(static_cast<Eigen::Index>(keep.size()), nf);
    bo.resize(static_cast<Eigen::Index>(keep.size()));
    for (size_t i = 0; i < keep.size(); ++i) {
      bo(i) = b(keep[i]) - A.row(keep[i]).dot(r.fixed_z);
      for (int a = 0; a < nf; ++a) Ao(i, a) = A(keep[i], r.cols[a]);
    }
  };
  rows(p.Aeq, p.beq, r.eq_rows, q.Aeq, q.beq);
  rows(p.Gin, p.hin, r.in_rows, q.Gin, q.hin);
  return r;
}

class BranchAndBound {
 public:
  BranchAndBound(const MixedBinaryProgram& p, const MipConfig& cfg) : p_(p), cfg_(cfg), qp_(cfg.qp) {
    relax_ = p.base;
    const int n = relax_.n();
    if (relax_.lo.size() == 0) relax_.lo = Vec::Constant(n, -kInf);
    if (relax_.hi.size() == 0) relax_.hi = Vec::Constant(n, kInf);
    for (int j : p.binary_indices) {
      relax_.lo(j) = std::max(relax_.lo(j), 0.0);
      relax_.hi(j) = std::min(relax_.hi(j), 1.0);
    }
    if (!p.cardinality_groups.empty()) {
      const int m0 = static_cast<int>(relax_.Gin.rows());
      const int mg = static_cast<int>(p.cardinality_groups.size());
      Mat G = Mat::Zero(m0 + mg, n);
      Vec h(m0 + mg);
      if (m0) {
        G.topRows(m0) = relax_.Gin;
        h.head(m0) = relax_.hin;
      }
      for (int g = 0; g < mg; ++g) {
        for (int j : p.cardinality_groups[g]) G(m0 + g, j) = -1.0;
        h(m0 + g) = -1.0;
      }
      relax_.Gin = std::move(G);
      relax_.hin = std::move(h);
    }
    for (size_t b = 0; b < p.binary_indices.size(); ++b) pos_[p.binary_indices[b]] = static_cast<int>(b);
  }

  MipSolution run() {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    if (cfg_.time_limit > 0.0)
      qp_.deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(cfg_.time_limit));
    MipSolution out;
    const int B = static_cast<int>(p_.binary_indices.size());

    if (cfg_.incumbent && cfg_.incumbent->size() == relax_.n()) {
      std::vector<signed char> fx(B);
      for (int b = 0; b < B; ++b) fx[b] = (*cfg_.incumbent)(p_.binary_indices[b]) > 0.5 ? 1 : 0;
      if (groups_ok(fx)) {
        auto ev = evaluate(fx, nullptr, nullptr);
        if (!ev.infeasible && !ev.failed) accept_incumbent(ev.sol, out);
      }
    }

    Node root;
    root.id = next_id_++;
    root.bound = cfg_.objective_floor;
    root.fixed.assign(B, -1);
    for (int b = 0; b < B; ++b) {
      const int j = p_.binary_indices[b];
      if (relax_.lo(j) > 0.5) root.fixed[b] = 1;
      else if (relax_.hi(j) < 0.5) root.fixed[b] = 0;
    }
    if (propagate(root.fixed)) push(std::move(root));

    const int threads = std::max(1, cfg_.threads);
    double last_bound = -kInf;
    bool hit_nodes = false, hit_time = false;
    double lost_bound = kInf;  // nodes whose relaxation failed stay unresolved
    while (!open_.empty()) {
      if (out.nodes >= cfg_.max_nodes) {
        hit_nodes = true;
        break;
      }
      if (cfg_.time_limit > 0.0 && elapsed() > cfg_.time_limit) {
        hit_time = true;
        break;
      }
      if (threads > 1) speculate(threads);

      auto it = open_.begin();
      const long id = it->second;
      Node node = std::move(nodes_.at(id));
      nodes_.erase(id);
      open_.erase(it);
      const double gb = std::min(node.bound, out.has_incumbent ? out.objective : kInf);
      if (cfg_.record_bounds) out.bound_history.push_back(std::max(gb, last_bound));
      last_bound = std::max(last_bound, gb);
      if (out.has_incumbent && node.bound >= out.objective - cfg_.abs_gap) {
        cache_.erase(id);
        continue;
      }

      Evaluated ev;
      if (auto c = cache_.find(id); c != cache_.end()) {
        ev = std::move(c->second);
        cache_.erase(c);
      } else {
        ev = evaluate(node.fixed, node.warm_z.get(), node.warm_basis.get());
      }
      ++out.nodes;
      if (ev.failed) {
        ++out.failed_nodes;
        lost_bound = std::min(lost_bound, node.bound);
        if (cfg_.time_limit > 0.0 && elapsed() > cfg_.time_limit) {
          hit_time = true;
          break;
        }
        continue;
      }
      if (ev.infeasible) continue;
      const double bound = std::max(node.bound, ev.sol.objective);
      if (out.has_incumbent && bound >= out.objective - cfg_.abs_gap) continue;

      int branch = -1;
      double best_frac = -1.0;
      for (int b = 0; b < B; ++b) {
        if (node.fixed[b] >= 0) continue;
        const double v = ev.sol.z(p_.binary_indices[b]);
        const double frac = std::min(v, 1.0 - v);
        if (frac > cfg_.int_tol && frac > best_frac + 1e-12) {
          best_frac = frac;
          branch = b;
        }
      }
      if (branch < 0) {
        std::vector<signed char> fx = node.fixed;
        for (int b = 0; b < B; ++b)
          if (fx[b] < 0) fx[b] = ev.sol.z(p_.binary_indices[b]) > 0.5 ? 1 : 0;
        bool all_fixed = std::all_of(node.fixed.begin(), node.fixed.end(), [](signed char c) { return c >= 0; });
        if (all_fixed) {
          accept_incumbent(ev.sol, out);
        } else {
          auto leaf = evaluate(fx, &ev.sol.z, &ev.sol.basis);
          if (!leaf.infeasible && !leaf.failed) accept_incumbent(leaf.sol, out);
        }
        continue;
      }
      auto z = std::make_shared<const Vec>(ev.sol.z);
      auto basis = std::make_shared<const QpBasis>(ev.sol.basis);
      for (int v = 0; v <= 1; ++v) {
        Node child;
        child.id = next_id_++;
        child.bound = bound;
        child.fixed = node.fixed;
        child.fixed[branch] = static_cast<signed char>(v);
        child.warm_z = z;
        child.warm_basis = basis;
        if (propagate(child.fixed)) push(std::move(child));
      }
    }

    out.seconds = elapsed();
    double open_bound = lost_bound;
    for (const auto& [key, id] : open_) open_bound = std::min(open_bound, key.first);
    if (out.has_incumbent) {
      out.best_bound = std::min(open_bound, out.objective);
      out.bound_gap = std::abs(out.objective - out.best_bound);
    } else {
      out.best_bound = open_bound;
      out.bound_gap = kInf;
    }
    if (hit_time && out.bound_gap > cfg_.abs_gap)
      out.status = MipStatus::TimeLimit;
    else if ((hit_nodes || lost_bound < kInf) && out.bound_gap > cfg_.abs_gap)
      out.status = MipStatus::GapLimit;
    else
      out.status = out.has_incumbent ? MipStatus::Optimal : MipStatus::Infeasible;
    return out;
  }

 private:
  void push(Node n) {
    open_.insert({{n.bound, n.id}, n.id});
    nodes_.emplace(n.id, std::move(n));
  }

  bool groups_ok(const std::vector<signed char>& fx) const {
    for (const auto& g : p_.cardinality_groups) {
      bool any = false;
      for (int j : g) {
        auto it = pos_.find(j);
        any |= it == pos_.end() || fx[it->second] != 0;
      }
      if (!any) return false;
    }
    return true;
  }

  // Fixes forced members of cardinality groups; false when a group cannot be satisfied.
  bool propagate(std::vector<signed char>& fx) const {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& g : p_.cardinality_groups) {
        int free_count = 0, last_free = -1;
        bool satisfied = false, has_continuous = false;
        for (int j : g) {
          auto it = pos_.find(j);
          if (it == pos_.end()) {
            has_continuous = true;
            continue;
          }
          const signed char v = fx[it->second];
          if (v == 1) satisfied = true;
          if (v < 0) {
            ++free_count;
            last_free = it->second;
          }
        }
        if (satisfied || has_continuous) continue;
        if (free_count == 0) return false;
        if (free_count == 1) {
          fx[last_free] = 1;
          changed = true;
        }
      }
    }
    return true;
  }

  Evaluated evaluate(const std::vector<signed char>& fx, const Vec* wz, const QpBasis* wb) const {
    QuadraticProgram q = relax_;
    for (size_t b = 0; b < fx.size(); ++b) {
      if (fx[b] < 0) continue;
      const int j = p_.binary_indices[b];
      q.lo(j) = q.hi(j) = fx[b];
    }
    Evaluated ev;
    ev.sol = solve_reduced(q, wz, wb, ev.infeasible);
    if (ev.infeasible) return ev;
    if (ev.sol.status == QpStatus::Infeasible) ev.infeasible = true;
    else if (ev.sol.status != QpStatus::Optimal) ev.failed = true;
    return ev;
  }

  QpSolution solve_reduced(const QuadraticProgram& q, const Vec* wz, const QpBasis* wb,
                           bool& infeasible) const {
    const auto red = reduce(q, qp_.tol_feas);
    if (red.infeasible) {
      infeasible = true;
      return {};
    }
    const int n = q.n(), nf = red.qp.n();
    std::vector<int> var_to(n, -1), row_to(q.Gin.rows(), -1);
    for (int a = 0; a < nf; ++a) var_to[red.cols[a]] = a;
    for (size_t i = 0; i < red.in_rows.size(); ++i) row_to[red.in_rows[i]] = static_cast<int>(i);
    Vec rz;
    if (wz && wz->size() == n) {
      rz.resize(nf);
      for (int a = 0; a < nf; ++a) rz(a) = (*wz)(red.cols[a]);
    }
    QpBasis rb;
    if (wb) {
      for (int i : wb->rows)
        if (i >= 0 && i < static_cast<int>(row_to.size()) && row_to[i] >= 0) rb.rows.push_back(row_to[i]);
      for (int j : wb->at_lo)
        if (j >= 0 && j < n && var_to[j] >= 0) rb.at_lo.push_back(var_to[j]);
      for (int j : wb->at_hi)
        if (j >= 0 && j < n && var_to[j] >= 0) rb.at_hi.push_back(var_to[j]);
    }
    const auto rs = solve_qp(red.qp, qp_, rz.size() ? &rz : nullptr, wb ? &rb : nullptr);
    QpSolution s;
    s.status = rs.status;
    s.iterations = rs.iterations;
    s.z = red.fixed_z;
    for (int a = 0; a < nf; ++a) s.z(red.cols[a]) = rs.z(a);
    s.objective = q.objective(s.z);
    s.eq_multipliers = Vec::Zero(q.Aeq.rows());
    s.ineq_multipliers = Vec::Zero(q.Gin.rows());
    s.bound_multipliers = Vec::Zero(n);
    for (int i : rs.basis.rows) s.basis.rows.push_back(red.in_rows[i]);
    for (int a : rs.basis.at_lo) s.basis.at_lo.push_back(red.cols[a]);
    for (int a : rs.basis.at_hi) s.basis.at_hi.push_back(red.cols[a]);
    return s;
  }

  void accept_incumbent(const QpSolution& s, MipSolution& out) const {
    if (out.has_incumbent && s.objective >= out.objective) return;
    out.has_incumbent = true;
    out.objective = s.objective;
    out.z = s.z;
    out.binaries.clear();
    for (int j : p_.binary_indices) {
      const int v = s.z(j) > 0.5 ? 1 : 0;
      out.binaries.push_back(v);
      out.z(j) = v;
    }
  }

  // Solves the leading open nodes concurrently; results depend only on node data.
  void speculate(int threads) {
    std::vector<long> ids;
    for (auto it = open_.begin(); it != open_.end() && static_cast<int>(ids.size()) < threads; ++it)
      if (!cache_.count(it->second)) ids.push_back(it->second);
    if (ids.size() < 2) return;
    std::vector<Evaluated> res(ids.size());
    std::vector<std::thread> pool;
    for (size_t i = 0; i < ids.size(); ++i) {
      const Node* nd = &nodes_.at(ids[i]);
      pool.emplace_back([this, &res, i, nd] {
        res[i] = evaluate(nd->fixed, nd->warm_z.get(), nd->warm_basis.get());
      });
    }
    for (auto& t : pool) t.join();
    for (size_t i = 0; i < ids.size(); ++i) cache_[ids[i]] = std::move(res[i]);
  }

  const MixedBinaryProgram& p_;
  const MipConfig& cfg_;
  SolverConfig qp_;
  QuadraticProgram relax_;
  std::map<int, int> pos_;
  std::set<std::pair<std::pair<double, long>, long>> open_;
  std::map<long, Node> nodes_;
  std::map<long, Evaluated> cache_;
  long next_id_ = 0;
};

}  // namespace

const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::Optimal: return "Optimal";
    case MipStatus::Infeasible: return "Infeasible";
    case MipStatus::GapLimit: return "GapLimit";
    case MipStatus::TimeLimit: return "TimeLimit";
  }
  return "?";
}

MipSolution solve_mip(const MixedBinaryProgram& p, const MipConfig& cfg) {
  BranchAndBound bb(p, cfg);
  return bb.run();
}

int default_threads() {
  if (const char* env = std::getenv("IKKT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace ikkt
