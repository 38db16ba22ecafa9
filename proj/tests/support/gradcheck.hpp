#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace dfrnet::testing {

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates where both gradients are below this magnitude are skipped:
  // their relative error is dominated by finite-difference rounding.
  double min_grad = 1e-6;
  int64_t coords_per_tensor = 16;
  uint64_t seed = 1;
  // When the one-sided slopes differ by more than kink_tol * |slope| and the
  // second difference also changes between eps and 2*eps, a ReLU/clamp kink
  // sits inside the stencil. The central difference is no derivative there;
  // such coordinates are counted in `kinks` and left out.
  double kink_tol = 1e-4;
};

struct GradCheckResult {
  double max_rel_error = 0;
  int64_t checked = 0;
  int64_t kinks = 0;
  std::string worst;  // description of the worst coordinate

  // Fails when too many coordinates were excluded as kinks to mean anything.
  bool ok(double tol, double max_kink_fraction = 0.1) const {
    return checked > 0 && max_rel_error < tol &&
           static_cast<double>(kinks) <= max_kink_fraction * static_cast<double>(checked + kinks);
  }
};

/// Compares autograd against central differences of the scalar `f` with
/// respect to sampled coordinates of every tensor in `wrt` (float64, with
/// requires_grad set). Coordinates are drawn from a fixed-seed generator.
GradCheckResult gradcheck(const std::function<torch::Tensor()>& f, const std::vector<torch::Tensor>& wrt,
                          const GradCheckOptions& options = {});

/// Sum of out * r with a fixed random weight r; turns any output into a
/// scalar whose gradient exercises every element.
torch::Tensor weighted_sum(const torch::Tensor& out, uint64_t seed);

}  // namespace dfrnet::testing
