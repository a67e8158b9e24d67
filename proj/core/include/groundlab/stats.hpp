#pragma once

#include <optional>
#include <span>

namespace groundlab {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> xs);
/// Pearson correlation; empty when either series has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace groundlab
