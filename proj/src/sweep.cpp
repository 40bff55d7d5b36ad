#include "eeo/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eeo/checkpoint.hpp"
#include "eeo/errors.hpp"
#include "eeo/plot.hpp"

namespace eeo {

namespace {

using nlohmann::json;

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

bool subset_of(std::span<const float> grid, std::span<const float> paper) {
    return std::all_of(grid.begin(), grid.end(), [&](float v) {
        return std::find(paper.begin(), paper.end(), v) != paper.end();
    });
}

std::vector<float> levels_for(const ExperimentConfig& cfg, DistortionKind kind) {
    switch (kind) {
        case DistortionKind::Pristine: return {0.0f};
        case DistortionKind::Blur: return cfg.blur_grid;
        case DistortionKind::Noise: return cfg.noise_grid;
    }
    return {};
}

struct CellKey {
    std::string mode;
    std::string kind;
    float level;
    std::string profile;

    bool operator==(const CellKey&) const = default;
};

// Accumulates one cell's per-sample records and reduces them to a SweepRow.
struct CellAccumulator {
    std::vector<InferenceResult> results;
    std::vector<int> labels;
    std::vector<double> correct01;
    std::vector<double> ondevice01;
    std::vector<double> totals;
    double classifier_sum = 0, edge_sum = 0, serialize_sum = 0, network_sum = 0, cloud_sum = 0;

    void add(const InferenceResult& r, int label, const LatencyBreakdown& lat) {
        results.push_back(r);
        labels.push_back(label);
        correct01.push_back(r.predicted_class == label ? 1.0 : 0.0);
        ondevice01.push_back(r.offloaded ? 0.0 : 1.0);
        totals.push_back(lat.total_ms);
        classifier_sum += lat.classifier_ms;
        edge_sum += lat.edge_compute_ms;
        serialize_sum += lat.serialize_ms;
        network_sum += lat.emulated_network_ms;
        cloud_sum += lat.cloud_compute_ms;
    }

    SweepRow reduce(const CellKey& key, const std::vector<int>& slots) const {
        SweepRow row;
        row.mode = key.mode;
        row.kind = distortion_kind_from_name(key.kind);
        row.level = key.level;
        row.profile = key.profile;
        row.n = results.size();
        row.overall_accuracy = overall_accuracy(results, labels);
        row.accuracy_ci95 = mean_ci95(correct01).half_width;
        row.on_device_probability = on_device_probability(results);
        row.on_device_ci95 = mean_ci95(ondevice01).half_width;
        for (int slot : slots) {
            const auto acc = exit_point_accuracy(results, labels, slot);
            row.exit_accuracy.push_back(acc ? *acc : std::nan(""));
        }
        const MeanCi t = mean_ci95(totals);
        row.mean_total_ms = t.mean;
        row.total_ms_ci95 = t.half_width;
        const double n = static_cast<double>(results.size());
        row.mean_classifier_ms = classifier_sum / n;
        row.mean_edge_compute_ms = edge_sum / n;
        row.mean_serialize_ms = serialize_sum / n;
        row.mean_network_ms = network_sum / n;
        row.mean_cloud_ms = cloud_sum / n;
        return row;
    }
};

} // namespace

void ExperimentConfig::validate() const {
    if (!(p_tar >= 0.0f && p_tar <= 1.0f)) throw ConfigError("p_tar must lie in [0,1]");
    if (kinds.empty()) throw ConfigError("at least one distortion kind required");
    if (!subset_of(blur_grid, blur_levels())) {
        throw ConfigError("blur levels outside the supported grid {1,2,3,4,5}");
    }
    if (!subset_of(noise_grid, noise_levels())) {
        throw ConfigError("noise levels outside the supported grid {5,10,20,30,40}");
    }
    if (profiles.empty()) throw ConfigError("at least one network profile required");
    for (const auto& p : profiles) p.validate();
    if (modes.empty()) throw ConfigError("at least one mode required");
    for (const auto& m : modes) {
        if (m != "expert" && m != "pristine-baseline") {
            throw ConfigError("unknown mode '" + m + "' (expert | pristine-baseline)");
        }
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open experiment config " + path.string());
    ExperimentConfig cfg;
    cfg.profiles.clear();
    std::string line;
    int lineno = 0;
    auto split_csv = [](const std::string& v) {
        std::vector<std::string> out;
        std::istringstream is(v);
        std::string item;
        while (std::getline(is, item, ',')) out.push_back(item);
        return out;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "model") cfg.model_path = value;
        else if (key == "classifier") cfg.classifier_path = value;
        else if (key == "dataset") cfg.dataset = value;
        else if (key == "p_tar") cfg.p_tar = std::stof(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "clock") cfg.wall_clock = (value == "wall");
        else if (key == "jitter_ms") cfg.jitter_ms = std::stod(value);
        else if (key == "edge_macs_per_ms") cfg.cost.edge_macs_per_ms = std::stod(value);
        else if (key == "cloud_macs_per_ms") cfg.cost.cloud_macs_per_ms = std::stod(value);
        else if (key == "serialize_bytes_per_ms") cfg.cost.serialize_bytes_per_ms = std::stod(value);
        else if (key == "modes") cfg.modes = split_csv(value);
        else if (key == "kinds") {
            cfg.kinds.clear();
            for (const auto& k : split_csv(value)) cfg.kinds.push_back(distortion_kind_from_name(k));
        } else if (key == "blur_levels") {
            cfg.blur_grid.clear();
            for (const auto& v : split_csv(value)) cfg.blur_grid.push_back(std::stof(v));
        } else if (key == "noise_levels") {
            cfg.noise_grid.clear();
            for (const auto& v : split_csv(value)) cfg.noise_grid.push_back(std::stof(v));
        } else if (key == "profiles") {
            for (const auto& name : split_csv(value)) {
                const auto p = builtin_profile(name);
                if (!p) throw ConfigError("unknown builtin profile '" + name + "'");
                cfg.profiles.push_back(*p);
            }
        } else if (key == "profile_custom") {
            cfg.profiles.push_back(parse_profile(value));
        } else if (key == "profiles_file") {
            for (const auto& p : load_profiles_file(value)) cfg.profiles.push_back(p);
        } else {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        }
    }
    if (cfg.profiles.empty()) cfg.profiles = builtin_profiles();
    return cfg;
}

std::string csv_header(int exit_count) {
    std::string h =
        "mode,kind,level,profile,n,overall_accuracy,accuracy_ci95,on_device_probability,"
        "on_device_ci95";
    for (int e = 1; e <= exit_count; ++e) h += ",exit_side" + std::to_string(e) + "_accuracy";
    h += ",exit_final_accuracy,mean_total_ms,total_ms_ci95,mean_classifier_ms,"
         "mean_edge_compute_ms,mean_serialize_ms,mean_network_ms,mean_cloud_ms";
    return h;
}

std::string csv_row(const SweepRow& row) {
    std::ostringstream os;
    os << row.mode << ',' << distortion_kind_name(row.kind) << ',' << num(row.level) << ','
       << row.profile << ',' << row.n << ',' << num(row.overall_accuracy) << ','
       << num(row.accuracy_ci95) << ',' << num(row.on_device_probability) << ','
       << num(row.on_device_ci95);
    for (double acc : row.exit_accuracy) {
        os << ',';
        if (!std::isnan(acc)) os << num(acc);
    }
    os << ',' << num(row.mean_total_ms) << ',' << num(row.total_ms_ci95) << ','
       << num(row.mean_classifier_ms) << ',' << num(row.mean_edge_compute_ms) << ','
       << num(row.mean_serialize_ms) << ',' << num(row.mean_network_ms) << ','
       << num(row.mean_cloud_ms);
    return os.str();
}

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    if (config.model_path.empty()) throw ConfigError("sweep needs a model checkpoint path");

    const EarlyExitModel model = load_model(config.model_path);
    std::optional<DistortionClassifier> classifier;
    const bool wants_expert =
        std::find(config.modes.begin(), config.modes.end(), "expert") != config.modes.end();
    if (wants_expert) {
        if (config.classifier_path.empty()) {
            throw ConfigError("expert mode needs a classifier checkpoint path");
        }
        classifier = load_classifier(config.classifier_path);
    }
    const DatasetSplits data = load_dataset(config.dataset, config.seed);
    if (data.test.items.empty()) throw ConfigError("test split is empty");

    std::filesystem::create_directories(config.out_dir);
    SweepResult result;
    result.csv_path = std::filesystem::path(config.out_dir) / "results.csv";
    result.trace_path = std::filesystem::path(config.out_dir) / "trace.jsonl";

    std::ofstream csv(result.csv_path);
    std::ofstream trace(result.trace_path);
    if (!csv || !trace) throw ConfigError("cannot write into out_dir " + config.out_dir);

    std::vector<int> slots = model.slots();
    csv << csv_header(model.exit_count()) << "\n";

    const CloudService cloud(model, "sweep-model", config.cost, !config.wall_clock);

    for (const std::string& mode : config.modes) {
        for (DistortionKind kind : config.kinds) {
            for (float level : levels_for(config, kind)) {
                // The distorted test copy depends only on (seed, kind, level),
                // so modes and profiles see identical pixels.
                const LabeledDataset cell_data =
                    kind == DistortionKind::Pristine
                        ? data.test
                        : distort_dataset(data.test, kind, level,
                                          Rng::derive(config.seed,
                                                      static_cast<std::uint64_t>(kind) * 1000 +
                                                          static_cast<std::uint64_t>(level)));
                for (const NetworkProfile& profile : config.profiles) {
                    VirtualClock vclock;
                    WallClock wclock;
                    Clock* clock = config.wall_clock ? static_cast<Clock*>(&wclock)
                                                     : static_cast<Clock*>(&vclock);
                    LoopbackTransport transport(&cloud);
                    EdgeConfig ec;
                    ec.model_id = "sweep-model";
                    ec.p_tar = config.p_tar;
                    ec.use_classifier = mode == "expert";
                    ec.profile = profile;
                    ec.jitter = {config.jitter_ms,
                                 Rng::derive(config.seed, 0x717 + static_cast<std::uint64_t>(kind))};
                    ec.cost = config.cost;
                    EdgeService edge(model, classifier, ec, &transport, clock);

                    CellAccumulator acc;
                    for (std::size_t i = 0; i < cell_data.items.size(); ++i) {
                        const auto& item = cell_data.items[i];
                        const EdgeService::Outcome out = edge.handle(item.image);
                        acc.add(out.result, item.label, out.latency);

                        json rec;
                        rec["mode"] = mode;
                        rec["kind"] = distortion_kind_name(kind);
                        rec["level"] = level;
                        rec["profile"] = profile.name;
                        rec["index"] = i;
                        rec["label"] = item.label;
                        rec["predicted"] = out.result.predicted_class;
                        rec["confidence"] = out.result.confidence;
                        rec["offloaded"] = out.result.offloaded;
                        rec["exit_taken"] = exit_taken_name(out.result.exit_taken);
                        rec["exit_slot"] = exit_slot_name(out.result.exit_slot);
                        rec["kind_used"] = distortion_kind_name(out.kind_used);
                        rec["classifier_ms"] = out.latency.classifier_ms;
                        rec["edge_compute_ms"] = out.latency.edge_compute_ms;
                        rec["serialize_ms"] = out.latency.serialize_ms;
                        rec["network_ms"] = out.latency.emulated_network_ms;
                        rec["cloud_compute_ms"] = out.latency.cloud_compute_ms;
                        rec["total_ms"] = out.latency.total_ms;
                        trace << rec.dump() << "\n";
                    }
                    const SweepRow row =
                        acc.reduce({mode, distortion_kind_name(kind), level, profile.name}, slots);
                    csv << csv_row(row) << "\n";
                    result.rows.push_back(row);
                }
            }
        }
    }
    csv.close();
    trace.close();

    // Figures: accuracy and on-device per distortion kind (first profile),
    // latency per (kind, profile). Level 0 comes from the pristine row.
    auto find_row = [&](const std::string& mode, DistortionKind kind, float level,
                        const std::string& profile) -> const SweepRow* {
        for (const SweepRow& r : result.rows) {
            if (r.mode == mode && r.kind == kind && r.level == level && r.profile == profile) {
                return &r;
            }
        }
        return nullptr;
    };
    const bool has_pristine =
        std::find(config.kinds.begin(), config.kinds.end(), DistortionKind::Pristine) !=
        config.kinds.end();

    for (DistortionKind kind : config.kinds) {
        if (kind == DistortionKind::Pristine) continue;
        const std::string kname = distortion_kind_name(kind);

        auto series_over_levels = [&](const std::string& profile, auto&& value, auto&& err) {
            std::vector<PlotSeries> out;
            for (const std::string& mode : config.modes) {
                PlotSeries s;
                s.name = mode;
                if (has_pristine) {
                    if (const SweepRow* r0 = find_row(mode, DistortionKind::Pristine, 0, profile)) {
                        s.x.push_back(0);
                        s.y.push_back(value(*r0));
                        s.y_err.push_back(err(*r0));
                    }
                }
                for (float level : levels_for(config, kind)) {
                    if (const SweepRow* r = find_row(mode, kind, level, profile)) {
                        s.x.push_back(level);
                        s.y.push_back(value(*r));
                        s.y_err.push_back(err(*r));
                    }
                }
                out.push_back(std::move(s));
            }
            return out;
        };

        const std::string& p0 = config.profiles.front().name;
        auto acc_path = std::filesystem::path(config.out_dir) / ("fig_accuracy_" + kname + ".svg");
        write_line_plot_svg(acc_path, "Overall accuracy vs " + kname + " level",
                            kname + " level", "overall accuracy",
                            series_over_levels(p0, [](const SweepRow& r) { return r.overall_accuracy; },
                                               [](const SweepRow& r) { return r.accuracy_ci95; }));
        result.figure_paths.push_back(acc_path);

        auto dev_path = std::filesystem::path(config.out_dir) / ("fig_ondevice_" + kname + ".svg");
        write_line_plot_svg(dev_path, "On-device probability vs " + kname + " level",
                            kname + " level", "on-device probability",
                            series_over_levels(p0,
                                               [](const SweepRow& r) { return r.on_device_probability; },
                                               [](const SweepRow& r) { return r.on_device_ci95; }));
        result.figure_paths.push_back(dev_path);

        for (const NetworkProfile& profile : config.profiles) {
            auto lat_path = std::filesystem::path(config.out_dir) /
                            ("fig_latency_" + kname + "_" + profile.name + ".svg");
            write_line_plot_svg(lat_path,
                                "End-to-end latency vs " + kname + " level (" + profile.name + ")",
                                kname + " level", "mean latency [ms]",
                                series_over_levels(profile.name,
                                                   [](const SweepRow& r) { return r.mean_total_ms; },
                                                   [](const SweepRow& r) { return r.total_ms_ci95; }));
            result.figure_paths.push_back(lat_path);
        }
    }
    return result;
}

std::vector<SweepRow> recount_from_trace(const std::filesystem::path& trace_path, int exit_count) {
    std::ifstream in(trace_path);
    if (!in) throw ConfigError("cannot open trace file " + trace_path.string());

    std::vector<int> slots;
    for (int e = 1; e <= exit_count; ++e) slots.push_back(e);
    slots.push_back(kFinalSlot);

    std::vector<CellKey> order;
    std::vector<CellAccumulator> cells;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        const CellKey key{rec.at("mode"), rec.at("kind"), rec.at("level"), rec.at("profile")};
        std::size_t idx = 0;
        for (; idx < order.size(); ++idx) {
            if (order[idx] == key) break;
        }
        if (idx == order.size()) {
            order.push_back(key);
            cells.emplace_back();
        }

        InferenceResult r;
        r.predicted_class = rec.at("predicted");
        r.confidence = rec.at("confidence");
        r.offloaded = rec.at("offloaded");
        const std::string taken = rec.at("exit_taken");
        r.exit_taken = taken == "side" ? ExitTaken::Side
                                       : (taken == "final" ? ExitTaken::Final : ExitTaken::Fallback);
        const std::string slot = rec.at("exit_slot");
        r.exit_slot = slot == "final" ? kFinalSlot : std::stoi(slot.substr(4));

        LatencyBreakdown lat;
        lat.classifier_ms = rec.at("classifier_ms");
        lat.edge_compute_ms = rec.at("edge_compute_ms");
        lat.serialize_ms = rec.at("serialize_ms");
        lat.emulated_network_ms = rec.at("network_ms");
        lat.cloud_compute_ms = rec.at("cloud_compute_ms");
        lat.total_ms = rec.at("total_ms");
        cells[idx].add(r, rec.at("label"), lat);
    }

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < order.size(); ++i) {
        rows.push_back(cells[i].reduce(order[i], slots));
    }
    return rows;
}

} // namespace eeo
