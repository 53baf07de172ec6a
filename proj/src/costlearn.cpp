#include "ikkt/costlearn.hpp"

#include "ikkt/errors.hpp"
#include "ikkt/weightfit.hpp"

#include <algorithm>

namespace ikkt {

std::vector<KktWindow> contiguous_runs(const std::vector<int>& indices) {
  std::vector<int> v = indices;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<KktWindow> runs;
  for (size_t i = 0; i < v.size(); ++i) {
    if (runs.empty() || v[i] != runs.back().last + 1)
      runs.push_back({v[i], v[i]});
    else
      runs.back().last = v[i];
  }
  return runs;
}

CostWeights extract_cost(const std::vector<Trajectory>& trajs, const Segmentation& seg,
                         const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                         const CostLearnConfig& cfg, CostReport* report) {
  if (seg.demos.size() != trajs.size()) throw ConfigError("segmentation does not match demos");
  std::vector<WindowSystem> systems;
  for (size_t d = 0; d < trajs.size(); ++d) {
    int used = 0;
    for (const auto& run : contiguous_runs(seg.demos[d].inactive)) {
      if (run.last - run.first < 2) continue;
      systems.push_back(reduce_window(run, trajs[d], known, dyn, cfg.active_tol));
      ++used;
    }
    if (used == 0)
      throw InsufficientInactiveData("demo " + std::to_string(d) +
                                     " has no run of 3 consecutive inactive steps");
  }
  const auto fit = fit_weights(systems, dyn.nx(), dyn.nu(), cfg.r_min, cfg.qp);
  if (report) {
    report->residual = fit.residual;
    report->runs = static_cast<int>(systems.size());
    report->degenerate = fit.degenerate;
  }
  return fit.w;
}

}  // namespace ikkt
