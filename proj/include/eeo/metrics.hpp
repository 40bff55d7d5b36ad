#pragma once

#include <optional>
#include <span>

#include "eeo/model.hpp"

namespace eeo {

/// correct / total over every sample, wherever it was classified.
double overall_accuracy(std::span<const InferenceResult> results, std::span<const int> labels);

/// Conditional accuracy among samples whose confidence gate fired at this
/// slot (fallback resolutions do not count as exiting there). Empty when no
/// sample exited there - undefined, not zero.
std::optional<double> exit_point_accuracy(std::span<const InferenceResult> results,
                                          std::span<const int> labels, int exit_slot);

/// Fraction classified on the edge (complement of the offloading probability).
double on_device_probability(std::span<const InferenceResult> results);

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * s / sqrt(n)
    std::size_t n = 0;
};

/// Normal-approximation 95% confidence interval around the mean.
MeanCi mean_ci95(std::span<const double> values);

} // namespace eeo
