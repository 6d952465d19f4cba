#include "amdcn/metrics.hpp"

#include <cmath>
#include <string>

namespace amdcn {
namespace metrics {

scalar scaled_mae_loss(const Tensor& pred, const Tensor& true_density, scalar gamma) {
    if (!pred.same_shape(true_density)) {
        throw ShapeError("scaled_mae_loss: pred " + pred.shape_str() + " vs truth " +
                         true_density.shape_str());
    }
    const std::int64_t n = pred.numel();
    scalar acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) acc += std::fabs(pred[i] - gamma * true_density[i]);
    return acc / static_cast<scalar>(n);
}

Tensor scaled_mae_loss_grad(const Tensor& pred, const Tensor& true_density, scalar gamma) {
    if (!pred.same_shape(true_density)) {
        throw ShapeError("scaled_mae_loss_grad: pred " + pred.shape_str() + " vs truth " +
                         true_density.shape_str());
    }
    const std::int64_t n = pred.numel();
    const scalar inv_n = 1.0 / static_cast<scalar>(n);
    Tensor g(pred.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        const scalar d = pred[i] - gamma * true_density[i];
        g[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return g;
}

scalar count_mae(const std::vector<scalar>& pred_counts, const std::vector<scalar>& true_counts) {
    if (pred_counts.empty() || pred_counts.size() != true_counts.size()) {
        throw ShapeError("count_mae: need equal nonempty lists, got " + std::to_string(pred_counts.size()) +
                         " and " + std::to_string(true_counts.size()));
    }
    scalar acc = 0.0;
    for (std::size_t i = 0; i < pred_counts.size(); ++i) acc += std::fabs(pred_counts[i] - true_counts[i]);
    return acc / static_cast<scalar>(pred_counts.size());
}

namespace {

// Band boundaries: 2^level near-equal contiguous bands, remainder pixels
// distributed to the leading bands.
std::vector<std::int64_t> band_edges(std::int64_t extent, std::int64_t bands) {
    const std::int64_t base = extent / bands;
    const std::int64_t rem = extent % bands;
    std::vector<std::int64_t> edges(static_cast<std::size_t>(bands) + 1, 0);
    for (std::int64_t b = 0; b < bands; ++b) {
        edges[static_cast<std::size_t>(b) + 1] = edges[static_cast<std::size_t>(b)] + base + (b < rem ? 1 : 0);
    }
    return edges;
}

void check_game_args(const Tensor& pred, const Tensor& truth, int level) {
    if (pred.rank() != 2 || !pred.same_shape(truth)) {
        throw ShapeError("game: need two equal [H,W] maps, got " + pred.shape_str() + " and " +
                         truth.shape_str());
    }
    if (level < 0 || level > 8) {
        throw ShapeError("game: level must be in 0..8, got " + std::to_string(level));
    }
    const std::int64_t bands = std::int64_t{1} << level;
    if (bands > pred.dim(0) || bands > pred.dim(1)) {
        throw ShapeError("game: level " + std::to_string(level) + " needs a " + std::to_string(bands) + "x" +
                         std::to_string(bands) + " grid, finer than the " + std::to_string(pred.dim(0)) +
                         "x" + std::to_string(pred.dim(1)) + " map");
    }
}

} // namespace

scalar game(const Tensor& pred, const Tensor& truth, int level) {
    check_game_args(pred, truth, level);
    const std::int64_t bands = std::int64_t{1} << level;
    const std::vector<std::int64_t> ys = band_edges(pred.dim(0), bands);
    const std::vector<std::int64_t> xs = band_edges(pred.dim(1), bands);
    scalar total = 0.0;
    for (std::int64_t by = 0; by < bands; ++by)
        for (std::int64_t bx = 0; bx < bands; ++bx) {
            scalar p = 0.0, t = 0.0;
            for (std::int64_t y = ys[static_cast<std::size_t>(by)]; y < ys[static_cast<std::size_t>(by) + 1]; ++y)
                for (std::int64_t x = xs[static_cast<std::size_t>(bx)]; x < xs[static_cast<std::size_t>(bx) + 1]; ++x) {
                    p += pred.at2(y, x);
                    t += truth.at2(y, x);
                }
            total += std::fabs(p - t);
        }
    return total;
}

scalar game_batch(const std::vector<const Tensor*>& preds, const std::vector<const Tensor*>& truths,
                  int level) {
    if (preds.empty() || preds.size() != truths.size()) {
        throw ShapeError("game_batch: need equal nonempty lists");
    }
    scalar acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += game(*preds[i], *truths[i], level);
    return acc / static_cast<scalar>(preds.size());
}

bool game_monotonicity_check(const Tensor& pred, const Tensor& truth, int level_max) {
    scalar prev = game(pred, truth, 0);
    for (int level = 1; level <= level_max; ++level) {
        const scalar cur = game(pred, truth, level);
        if (cur + 1e-12 < prev) return false;
        prev = cur;
    }
    return true;
}

} // namespace metrics
} // namespace amdcn
