#pragma once

#include <cstdint>
#include <vector>

#include "amdcn/tensor.hpp"

namespace amdcn {
namespace metrics {

// L = (1/n) sum_i |pred_i - gamma * true_i|, n = pixel count.
scalar scaled_mae_loss(const Tensor& pred, const Tensor& true_density, scalar gamma);
// d/d(pred): sign(pred - gamma*true)/n, 0 at ties.
Tensor scaled_mae_loss_grad(const Tensor& pred, const Tensor& true_density, scalar gamma);

scalar count_mae(const std::vector<scalar>& pred_counts, const std::vector<scalar>& true_counts);

// Grid Average Mean absolute Error at level L: the density maps are split
// into 4^L regions (2^L near-equal contiguous bands per axis, remainder
// pixels going to the leading bands) and the per-region absolute count
// errors are summed. L is capped at 8 and the grid must not be finer than
// one pixel per band.
scalar game(const Tensor& pred, const Tensor& truth, int level);
scalar game_batch(const std::vector<const Tensor*>& preds, const std::vector<const Tensor*>& truths,
                  int level);

// GAME(L+1) >= GAME(L) holds whenever each level-L region is exactly the
// union of four level-(L+1) regions (true for power-of-two dims).
bool game_monotonicity_check(const Tensor& pred, const Tensor& truth, int level_max);

} // namespace metrics
} // namespace amdcn
