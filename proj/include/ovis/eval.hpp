#pragma once

#include "ovis/io.hpp"

namespace ovis {

// Absolute trajectory error: nearest-neighbour time association (20 ms
// window), closed-form SE(3) alignment on positions, RMSE of the remaining
// translational residuals. Throws InsufficientOverlap with < 3 matches.
double ate_rmse(const std::vector<TrajectorySample>& est,
                const std::vector<TrajectorySample>& gt);

// Relative pose error over a time offset delta:
// E = (gt_t^-1 gt_{t+d})^-1 (est_t^-1 est_{t+d}), RMSE of |trans(E)|/delta.
double rpe_rmse(const std::vector<TrajectorySample>& est,
                const std::vector<TrajectorySample>& gt, double delta = 1.0);

struct SegFrameMetrics {
  double iou = 0;                 // dynamic prediction (gamma < 0.5) vs gt movers
  double mean_gamma_static = 0;   // NaN if the frame has no gt-static pixels
  double mean_gamma_dynamic = 0;  // NaN if the frame has no gt-dynamic pixels
  int gt_dynamic_pixels = 0;
};

// gamma: per-pixel score in [0,1]; gt_mask: 0 = static, nonzero = mover id.
SegFrameMetrics seg_metrics(const ImageF& gamma, const Image<uint16_t>& gt_mask);

}  // namespace ovis
