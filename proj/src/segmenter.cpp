#include "ikkt/segmenter.hpp"

#include "ikkt/errors.hpp"
#include "ikkt/parallel.hpp"
#include "ikkt/weightfit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

namespace ikkt {

int segment_count(int N, int window) {
  if (N < 3) return 0;
  return std::max(1, N - std::min(window, N) + 1);
}

KktWindow segment_window(int j, int N, int window) {
  window = std::min(window, N);
  KktWindow w{j, j + window - 1};
  if (w.last >= N - 1) {
    w.last = N - 1;
    w.first = std::max(0, std::min(w.first, N - window) - 1);
  }
  return w;
}

double trace_omega(const CostWeights& w, const std::vector<int>& axis_map) {
  double t = 0.0;
  for (int i = 0; i < w.q.size(); ++i) t += w.q(i) / w.r(axis_map.at(i));
  return t;
}

SegmentCostEstimate estimate_segment_cost(const Trajectory& traj, int j,
                                          const std::vector<BoxConstraint>& known,
                                          const LinearDynamics& dyn, const SegmentConfig& cfg) {
  const int N = traj.length();
  if (j < 0 || j >= segment_count(N, cfg.window))
    throw std::out_of_range("segment start index out of range");
  const auto win = segment_window(j, N, cfg.window);
  const auto sys = reduce_window(win, traj, known, dyn, cfg.active_tol);
  const auto fit = fit_weights({sys}, dyn.nx(), dyn.nu(), cfg.r_min, cfg.qp);
  SegmentCostEstimate e;
  e.j = j;
  e.first = win.first;
  e.last = win.last;
  e.q = fit.w.q;
  e.r = fit.w.r;
  e.residual = fit.residual;
  e.trace_omega = trace_omega(fit.w, dyn.axis_map);
  return e;
}

namespace {

double t_density(double x, double nu) {
  const double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI);
  return std::exp(c - 0.5 * (nu + 1.0) * std::log1p(x * x / nu));
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * eps) return left + right + diff / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, eps, 50);
}

}  // namespace

double student_t_cdf(double t, double nu) {
  if (!(nu > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (t == 0.0) return 0.5;
  // x = tan(phi) maps [0, inf) onto [0, pi/2) and flattens the heavy tail.
  const double phi = std::atan(std::abs(t));
  auto g = [nu](double p) {
    const double c = std::cos(p);
    return t_density(std::tan(p), nu) / (c * c);
  };
  const double half = integrate(g, 0.0, phi, 1e-13);
  return t > 0.0 ? 0.5 + half : 0.5 - half;
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("probability must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, nu);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, nu) < p) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, nu) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double gesd_critical_value(int n, int i, double alpha) {
  const double ni = n - i;
  const double p = 1.0 - alpha / (2.0 * (ni + 1.0));
  const double t = student_t_quantile(p, ni - 1.0);
  return ni * t / std::sqrt((ni - 1.0 + t * t) * (ni + 1.0));
}

std::vector<int> gesd_outliers(const std::vector<double>& values, double alpha, int max_outliers,
                               double min_stdev) {
  const int n = static_cast<int>(values.size());
  if (n < 3) throw std::invalid_argument("GESD needs at least three values");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (max_outliers < 0 || 2 * max_outliers >= n)
    throw std::invalid_argument("max_outliers must be below half the sample size");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> removed;
  int count = 0;
  for (int i = 1; i <= max_outliers; ++i) {
    const double m = static_cast<double>(idx.size());
    double mean = 0.0;
    for (int k : idx) mean += values[k];
    mean /= m;
    double ss = 0.0;
    for (int k : idx) ss += (values[k] - mean) * (values[k] - mean);
    const double sd = std::sqrt(ss / (m - 1.0));
    if (!(sd > min_stdev)) break;
    size_t arg = 0;
    for (size_t k = 1; k < idx.size(); ++k)
      if (std::abs(values[idx[k]] - mean) > std::abs(values[idx[arg]] - mean)) arg = k;
    const double R = std::abs(values[idx[arg]] - mean) / sd;
    removed.push_back(idx[arg]);
    idx.erase(idx.begin() + static_cast<long>(arg));
    if (R > gesd_critical_value(n, i, alpha)) count = i;
  }
  std::vector<int> out(removed.begin(), removed.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

Segmentation segment_demonstrations(const std::vector<Trajectory>& trajs,
                                    const std::vector<BoxConstraint>& known,
                                    const LinearDynamics& dyn, const SegmentConfig& cfg) {
  Segmentation seg;
  seg.demos.resize(trajs.size());
  for (size_t d = 0; d < trajs.size(); ++d) {
    const auto& t = trajs[d];
    if (t.length() < 3) throw ConfigError("trajectory shorter than 3 steps");
    auto& out = seg.demos[d];
    const int n = segment_count(t.length(), cfg.window);
    out.estimates.resize(n);
    parallel_for(n, cfg.threads,
                 [&](int j) { out.estimates[j] = estimate_segment_cost(t, j, known, dyn, cfg); });

    std::set<int> active;
    if (n >= 3) {
      std::vector<double> tr(n);
      for (int j = 0; j < n; ++j) tr[j] = out.estimates[j].trace_omega;
      std::vector<double> mags(n);
      for (int j = 0; j < n; ++j) mags[j] = std::abs(tr[j]);
      std::nth_element(mags.begin(), mags.begin() + n / 2, mags.end());
      const int mo = cfg.max_outliers >= 0 ? std::min(cfg.max_outliers, (n - 1) / 2) : n / 3;
      out.outlier_windows = gesd_outliers(tr, cfg.alpha, mo, cfg.rel_spread * mags[n / 2]);
      for (int j : out.outlier_windows)
        for (int k = out.estimates[j].first; k <= out.estimates[j].last; ++k) active.insert(k);
    }
    for (int k = 0; k < t.length(); ++k) (active.count(k) ? out.active : out.inactive).push_back(k);
  }
  return seg;
}

}  // namespace ikkt
