#pragma once

#include <string>
#include <vector>

#include "amdcn/optim.hpp"

namespace amdcn {

// Renders the ablation comparison (MAE vs column count, one series per
// aggregator option) as a binary PPM line chart with markers and a legend.
void write_ablation_plot(const std::string& path, const std::vector<AblationCell>& cells);

} // namespace amdcn
