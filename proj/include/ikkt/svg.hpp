#pragma once

#include "ikkt/evalmetrics.hpp"
#include "ikkt/model.hpp"
#include "ikkt/segmenter.hpp"

#include <string>
#include <vector>

namespace ikkt {

// Demos as gray polylines, truth boxes gray filled, recovered boxes dashed red.
// Plots state dims 0 and 1.
std::string svg_overlay(const std::vector<Trajectory>& demos,
                        const std::vector<BoxConstraint>& truth,
                        const std::vector<BoxConstraint>& recovered, const std::string& title = {});

// trace(Omega) per window start of one demo; outlier windows in red.
std::string svg_trace(const Segmentation& seg, int demo, const std::string& title = {});

// IoU per sigma as a line over convergence bars.
std::string svg_sweep(const SweepTable& t);

}  // namespace ikkt
