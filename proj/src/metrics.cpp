#include "eeo/metrics.hpp"

#include <cmath>

#include "eeo/errors.hpp"

namespace eeo {

double overall_accuracy(std::span<const InferenceResult> results, std::span<const int> labels) {
    if (results.empty()) throw ValueError("overall_accuracy: empty result list");
    if (results.size() != labels.size()) {
        throw ValueError("overall_accuracy: " + std::to_string(results.size()) + " results vs " +
                         std::to_string(labels.size()) + " labels");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].predicted_class == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(results.size());
}

std::optional<double> exit_point_accuracy(std::span<const InferenceResult> results,
                                          std::span<const int> labels, int exit_slot) {
    if (results.size() != labels.size()) {
        throw ValueError("exit_point_accuracy: results/labels length mismatch");
    }
    std::size_t taken = 0, correct = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const InferenceResult& r = results[i];
        const bool here = (r.exit_taken == ExitTaken::Side && r.exit_slot == exit_slot) ||
                          (r.exit_taken == ExitTaken::Final && exit_slot == kFinalSlot);
        if (!here) continue;
        ++taken;
        if (r.predicted_class == labels[i]) ++correct;
    }
    if (taken == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(taken);
}

double on_device_probability(std::span<const InferenceResult> results) {
    if (results.empty()) throw ValueError("on_device_probability: empty result list");
    std::size_t on_device = 0;
    for (const InferenceResult& r : results) {
        if (!r.offloaded) ++on_device;
    }
    return static_cast<double>(on_device) / static_cast<double>(results.size());
}

MeanCi mean_ci95(std::span<const double> values) {
    MeanCi ci;
    ci.n = values.size();
    if (values.empty()) return ci;
    double sum = 0.0;
    for (double v : values) sum += v;
    ci.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return ci;
    double sq = 0.0;
    for (double v : values) sq += (v - ci.mean) * (v - ci.mean);
    const double s = std::sqrt(sq / static_cast<double>(values.size() - 1));
    ci.half_width = 1.96 * s / std::sqrt(static_cast<double>(values.size()));
    return ci;
}

} // namespace eeo
