// Command-line front end: training, calibration, the distortion classifier,
// the edge/cloud services and the experiment sweep.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "eeo/checkpoint.hpp"
#include "eeo/dataset.hpp"
#include "eeo/distortion_classifier.hpp"
#include "eeo/http_service.hpp"
#include "eeo/model.hpp"
#include "eeo/services.hpp"
#include "eeo/sweep.hpp"
#include "eeo/training.hpp"

namespace {

using namespace eeo;

std::pair<std::string, int> parse_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
        throw ConfigError("address must be host:port, got '" + addr + "'");
    }
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

NetworkProfile resolve_profile(const std::string& name, const std::string& custom) {
    if (name == "custom") {
        if (custom.empty()) {
            throw ConfigError("--profile custom needs --profile-spec name,throughput_bps,rtt_ms");
        }
        return parse_profile(custom);
    }
    const auto p = builtin_profile(name);
    if (!p) throw ConfigError("unknown profile '" + name + "' (sa-east-1|us-west-1|eu-west-3|custom)");
    return *p;
}

std::unique_ptr<std::ofstream> open_log(const std::string& path, std::ostream** out) {
    if (path.empty()) {
        *out = &std::cout;
        return nullptr;
    }
    auto file = std::make_unique<std::ofstream>(path);
    if (!*file) throw ConfigError("cannot open log file " + path);
    *out = file.get();
    return file;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Early-exit CNN with per-distortion expert branches and edge-to-cloud offloading"};
    app.require_subcommand(1);

    // train
    std::string dataset = "shapes-v1:6x600", out_path = "model.eexp", log_path;
    std::uint64_t seed = 1;
    int max_epochs = 60, exits = 3;
    auto* train_cmd = app.add_subcommand("train", "Joint multi-exit training on pristine images");
    train_cmd->add_option("--dataset", dataset, "Folder of class subfolders or builtin shapes-v1[:CxN]");
    train_cmd->add_option("--out", out_path, "Output checkpoint");
    train_cmd->add_option("--seed", seed, "Training seed");
    train_cmd->add_option("--max-epochs", max_epochs, "Cosine annealing horizon");
    train_cmd->add_option("--exits", exits, "Number of side exits");
    train_cmd->add_option("--log", log_path, "Epoch log file (default stdout)");

    // finetune
    std::string kind_name = "blur", in_path = "model.eexp";
    auto* finetune_cmd = app.add_subcommand("finetune", "Train expert branches for one distortion kind");
    finetune_cmd->add_option("--kind", kind_name, "blur | noise")->required();
    finetune_cmd->add_option("--in", in_path, "Input checkpoint")->required();
    finetune_cmd->add_option("--out", out_path, "Output checkpoint (defaults to --in)");
    finetune_cmd->add_option("--dataset", dataset, "Dataset used for fine-tuning");
    finetune_cmd->add_option("--seed", seed, "Seed");
    finetune_cmd->add_option("--max-epochs", max_epochs, "Cosine annealing horizon");
    finetune_cmd->add_option("--log", log_path, "Epoch log file (default stdout)");

    // calibrate
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit branch temperatures on validation data");
    calibrate_cmd->add_option("--in", in_path, "Checkpoint to calibrate")->required();
    calibrate_cmd->add_option("--out", out_path, "Output checkpoint (defaults to --in)");
    calibrate_cmd->add_option("--dataset", dataset, "Dataset whose validation split is used");
    calibrate_cmd->add_option("--seed", seed, "Seed");

    // train-dc / eval-dc
    std::string dc_path = "dc.eexp", cm_out;
    auto* traindc_cmd = app.add_subcommand("train-dc", "Train the distortion classifier");
    traindc_cmd->add_option("--dataset", dataset, "Dataset source");
    traindc_cmd->add_option("--out", dc_path, "Classifier checkpoint");
    traindc_cmd->add_option("--seed", seed, "Seed");
    traindc_cmd->add_option("--max-epochs", max_epochs, "Epoch cap");
    traindc_cmd->add_option("--log", log_path, "Epoch log file (default stdout)");

    auto* evaldc_cmd = app.add_subcommand("eval-dc", "Confusion matrix of a trained classifier");
    evaldc_cmd->add_option("--classifier", dc_path, "Classifier checkpoint")->required();
    evaldc_cmd->add_option("--dataset", dataset, "Dataset whose test split is classified");
    evaldc_cmd->add_option("--seed", seed, "Seed");
    evaldc_cmd->add_option("--out", cm_out, "Write the confusion matrix CSV here (default stdout)");

    // serve-cloud / serve-edge
    std::string listen_addr = "127.0.0.1:8801", cloud_addr = "127.0.0.1:8801";
    std::string model_path = "model.eexp", model_id = "default", profile_name = "sa-east-1",
                profile_spec;
    float p_tar = 0.8f;
    std::string mode = "expert";
    auto* cloud_cmd = app.add_subcommand("serve-cloud", "Run the cloud tail service");
    cloud_cmd->add_option("--model", model_path, "Checkpoint")->required();
    cloud_cmd->add_option("--listen", listen_addr, "host:port");
    cloud_cmd->add_option("--model-id", model_id, "Identifier requests must match");

    std::string edge_listen = "127.0.0.1:8800";
    auto* edge_cmd = app.add_subcommand("serve-edge", "Run the edge service");
    edge_cmd->add_option("--model", model_path, "Checkpoint")->required();
    edge_cmd->add_option("--classifier", dc_path, "Distortion classifier checkpoint");
    edge_cmd->add_option("--cloud", cloud_addr, "Cloud host:port");
    edge_cmd->add_option("--listen", edge_listen, "host:port to serve /v1/infer");
    edge_cmd->add_option("--profile", profile_name, "sa-east-1|us-west-1|eu-west-3|custom");
    edge_cmd->add_option("--profile-spec", profile_spec, "name,throughput_bps,rtt_ms for --profile custom");
    edge_cmd->add_option("--p-tar", p_tar, "Confidence threshold");
    edge_cmd->add_option("--mode", mode, "expert | pristine-baseline");
    edge_cmd->add_option("--model-id", model_id, "Identifier sent with offloads");

    // sweep
    std::string config_path, sweep_out;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run the measurement sweep");
    sweep_cmd->add_option("--config", config_path, "key=value experiment config")->required();
    sweep_cmd->add_option("--out", sweep_out, "Override the config's out_dir");

    // distort-cache
    std::string cache_dir = ".";
    auto* cache_cmd = app.add_subcommand("distort-cache", "Write distorted test-set cache files");
    cache_cmd->add_option("--dataset", dataset, "Dataset source");
    cache_cmd->add_option("--seed", seed, "Seed");
    cache_cmd->add_option("--out", cache_dir, "Directory for <split>_<kind>_<level>.bin files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            std::ostream* log = nullptr;
            auto log_file = open_log(log_path, &log);
            const DatasetSplits data = load_dataset(dataset, seed);
            EarlyExitModel model = EarlyExitModel::build(
                default_backbone_specs(), default_input_shape(), data.train.class_count, exits, seed);
            TrainHyper hyper;
            hyper.seed = seed;
            hyper.max_epochs = max_epochs;
            train_pristine(model, data, hyper, log);
            save_model(model, out_path);
            std::cerr << "wrote " << out_path << "\n";
        } else if (*finetune_cmd) {
            std::ostream* log = nullptr;
            auto log_file = open_log(log_path, &log);
            if (!finetune_cmd->count("--out")) out_path = in_path;
            const DistortionKind kind = distortion_kind_from_name(kind_name);
            EarlyExitModel model = load_model(in_path);
            const DatasetSplits data = load_dataset(dataset, seed);
            TrainHyper hyper;
            hyper.seed = seed;
            hyper.max_epochs = max_epochs;
            finetune_expert(model, kind, data, hyper, log);
            save_model(model, out_path);
            std::cerr << "wrote " << out_path << "\n";
        } else if (*calibrate_cmd) {
            if (!calibrate_cmd->count("--out")) out_path = in_path;
            EarlyExitModel model = load_model(in_path);
            const DatasetSplits data = load_dataset(dataset, seed);
            calibrate_all(model, data, seed);
            save_model(model, out_path);
            for (int slot : model.slots()) {
                for (DistortionKind kind : model.expert_kinds()) {
                    std::cout << "T[" << exit_slot_name(slot) << "," << distortion_kind_name(kind)
                              << "]=" << model.branch(slot, kind).temperature << "\n";
                }
            }
            std::cerr << "wrote " << out_path << "\n";
        } else if (*traindc_cmd) {
            std::ostream* log = nullptr;
            auto log_file = open_log(log_path, &log);
            const DatasetSplits data = load_dataset(dataset, seed);
            ClassifierTrainConfig cfg;
            cfg.seed = seed;
            cfg.max_epochs = max_epochs;
            const DistortionClassifier dc = train_distortion_classifier(data, cfg, log);
            save_classifier(dc, dc_path);
            std::cerr << "wrote " << dc_path << "\n";
        } else if (*evaldc_cmd) {
            const DistortionClassifier dc = load_classifier(dc_path);
            const DatasetSplits data = load_dataset(dataset, seed);
            ConfusionMatrix total;
            int variant = 0;
            auto merge = [&](DistortionKind kind, float level) {
                const ConfusionMatrix cm = evaluate_distortion_classifier(
                    dc, data.test, kind, level, Rng::derive(seed, 900 + variant++));
                for (int t = 0; t < 3; ++t) {
                    for (int p = 0; p < 3; ++p) total.counts[t][p] += cm.counts[t][p];
                }
            };
            merge(DistortionKind::Pristine, 0.0f);
            for (float level : blur_levels()) merge(DistortionKind::Blur, level);
            for (float level : noise_levels()) merge(DistortionKind::Noise, level);
            const std::string csv = total.to_csv();
            if (cm_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(cm_out);
                out << csv;
            }
            std::cerr << "accuracy=" << total.accuracy() << "\n";
        } else if (*cloud_cmd) {
            const auto [host, port] = parse_addr(listen_addr);
            const CloudService service(load_model(model_path), model_id, {},
                                       /*virtual_compute=*/false);
            CloudHttpServer server(service);
            std::cerr << "cloud service on " << host << ":" << port << " (model " << model_id
                      << ")\n";
            server.listen_blocking(host, port);
        } else if (*edge_cmd) {
            const auto [listen_host, listen_port] = parse_addr(edge_listen);
            const auto [cloud_host, cloud_port] = parse_addr(cloud_addr);
            EdgeConfig cfg;
            cfg.model_id = model_id;
            cfg.p_tar = p_tar;
            cfg.use_classifier = mode == "expert";
            cfg.profile = resolve_profile(profile_name, profile_spec);
            std::optional<DistortionClassifier> classifier;
            if (cfg.use_classifier) classifier = load_classifier(dc_path);
            HttpTransport transport(cloud_host, cloud_port);
            WallClock clock;
            EdgeService edge(load_model(model_path), std::move(classifier), cfg, &transport, &clock);
            EdgeHttpServer server(edge);
            std::cerr << "edge service on " << listen_host << ":" << listen_port << " -> cloud "
                      << cloud_host << ":" << cloud_port << " profile " << cfg.profile.name << "\n";
            server.listen_blocking(listen_host, listen_port);
        } else if (*sweep_cmd) {
            ExperimentConfig cfg = load_experiment_config(config_path);
            if (!sweep_out.empty()) cfg.out_dir = sweep_out;
            const SweepResult result = run_sweep(cfg);
            std::cerr << "wrote " << result.csv_path << " (" << result.rows.size() << " rows), "
                      << result.trace_path << " and " << result.figure_paths.size() << " figures\n";
        } else if (*cache_cmd) {
            const DatasetSplits data = load_dataset(dataset, seed);
            std::filesystem::create_directories(cache_dir);
            auto write = [&](DistortionKind kind, float level) {
                LabeledDataset d = distort_dataset(data.test, kind, level,
                                                   Rng::derive(seed, 700 + static_cast<int>(level)));
                d.split = Split::Test;
                const auto name = distorted_cache_name(Split::Test, kind, level);
                save_dataset_cache(d, std::filesystem::path(cache_dir) / name);
                std::cerr << "wrote " << name << "\n";
            };
            for (float level : blur_levels()) write(DistortionKind::Blur, level);
            for (float level : noise_levels()) write(DistortionKind::Noise, level);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
