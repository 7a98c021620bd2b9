#pragma once

#include <span>
#include <string_view>

#include "myofeat/features.hpp"

namespace myofeat::features::detail {

std::span<const MethodInfo> methods();

void evaluate_method(std::string_view method, std::span<const double> samples,
                     const FeatureConfig& config, std::span<double> out);

/// All methods in registry order; `out` must hold 79 values.
void evaluate_all(std::span<const double> samples, const FeatureConfig& config,
                  std::span<double> out);

}  // namespace myofeat::features::detail
