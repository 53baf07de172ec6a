#include "ikkt/pipeline.hpp"

#include "ikkt/errors.hpp"
#include "ikkt/parallel.hpp"

#include <chrono>

namespace ikkt {

std::vector<Trajectory> generate_demos(const Scenario& s, const ForwardConfig& cfg, int threads) {
  if (!s.weights_truth) throw ConfigError("scenario " + s.name + " has no truth weights");
  const int L = static_cast<int>(s.endpoints.size());
  std::vector<Trajectory> out(L);
  parallel_for(L, threads, [&](int e) {
    const auto f = solve_forward(s, e, *s.weights_truth, s.horizon, cfg);
    if (f.status != ForwardStatus::Optimal && f.status != ForwardStatus::LocallyOptimal)
      throw SolverError("scenario " + s.name + " demo " + std::to_string(e) + ": " +
                        to_string(f.status) + (f.message.empty() ? "" : " (" + f.message + ")"));
    out[e] = f.traj;
  });
  return out;
}

PipelineResult run_pipeline(const std::vector<Trajectory>& trajs,
                            const std::vector<BoxConstraint>& known, const LinearDynamics& dyn,
                            const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult r;
  r.seg = segment_demonstrations(trajs, known, dyn, cfg.segment);
  r.weights = extract_cost(trajs, r.seg, known, dyn, cfg.cost, &r.cost_report);
  r.boxes = extract_constraints(trajs, r.weights, known, dyn, cfg.constraints, &r.seg,
                                &r.constraint_report);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace ikkt
