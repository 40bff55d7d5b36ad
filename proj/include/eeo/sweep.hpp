#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eeo/dataset.hpp"
#include "eeo/distortion_classifier.hpp"
#include "eeo/metrics.hpp"
#include "eeo/model.hpp"
#include "eeo/netem.hpp"
#include "eeo/services.hpp"

namespace eeo {

struct ExperimentConfig {
    std::string model_path;
    std::string classifier_path;
    std::string dataset;  // folder or builtin name
    std::vector<DistortionKind> kinds{DistortionKind::Pristine, DistortionKind::Blur,
                                      DistortionKind::Noise};
    std::vector<float> blur_grid{1, 2, 3, 4, 5};
    std::vector<float> noise_grid{5, 10, 20, 30, 40};
    float p_tar = 0.8f;
    std::vector<NetworkProfile> profiles = builtin_profiles();
    std::vector<std::string> modes{"expert", "pristine-baseline"};
    std::uint64_t seed = 1;
    std::string out_dir = "results";
    bool wall_clock = false;
    ComputeCostModel cost{};
    double jitter_ms = 0.0;

    void validate() const;  // p_tar in [0,1], level grids within the paper grids
};

/// Flat key=value text (one pair per line, # comments).
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One (mode, kind, level, profile) cell of the sweep.
struct SweepRow {
    std::string mode;
    DistortionKind kind = DistortionKind::Pristine;
    float level = 0.0f;
    std::string profile;
    std::size_t n = 0;
    double overall_accuracy = 0.0;
    double accuracy_ci95 = 0.0;
    double on_device_probability = 0.0;
    double on_device_ci95 = 0.0;
    std::vector<double> exit_accuracy;       // per slot; NaN when undefined
    double mean_total_ms = 0.0;
    double total_ms_ci95 = 0.0;
    double mean_classifier_ms = 0.0;
    double mean_edge_compute_ms = 0.0;
    double mean_serialize_ms = 0.0;
    double mean_network_ms = 0.0;
    double mean_cloud_ms = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::filesystem::path csv_path;
    std::filesystem::path trace_path;
    std::vector<std::filesystem::path> figure_paths;
};

/// Runs every (mode, kind, level, profile) cell over the test split, writes
/// results.csv, trace.jsonl and the per-figure SVGs into out_dir.
SweepResult run_sweep(const ExperimentConfig& config);

/// Independent recount: rebuilds every CSV row from the raw trace only.
/// Returns the recomputed rows in file order.
std::vector<SweepRow> recount_from_trace(const std::filesystem::path& trace_path, int exit_count);

std::string csv_header(int exit_count);
std::string csv_row(const SweepRow& row);

} // namespace eeo
