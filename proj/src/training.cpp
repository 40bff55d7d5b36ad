#include "eeo/training.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "eeo/errors.hpp"
#include "eeo/ops.hpp"
#include "eeo/optim.hpp"
#include "eeo/rng.hpp"

namespace eeo {

namespace {

std::vector<Parameter*> backbone_params(EarlyExitModel& model) {
    return model.backbone().parameters();
}

std::vector<Parameter*> branch_params(EarlyExitModel& model, DistortionKind kind) {
    std::vector<Parameter*> out;
    for (int slot : model.slots()) {
        for (Parameter* p : model.branch(slot, kind).head.parameters()) out.push_back(p);
    }
    return out;
}

std::vector<Tensor> snapshot(const std::vector<Parameter*>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const Parameter* p : params) out.push_back(p->value);
    return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Tensor>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

Tensor batch_tensor(const LabeledDataset& ds, std::span<const std::size_t> idx) {
    std::vector<ImageU8> images;
    images.reserve(idx.size());
    for (std::size_t i : idx) images.push_back(ds.items[i].image);
    return preprocess_batch(images);
}

std::vector<int> batch_labels(const LabeledDataset& ds, std::span<const std::size_t> idx) {
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (std::size_t i : idx) labels.push_back(ds.items[i].label);
    return labels;
}

struct ExitTap {
    int slot;
    int position;  // backbone position of the tap (backbone size for final)
};

std::vector<ExitTap> exit_taps(const EarlyExitModel& model) {
    std::vector<ExitTap> taps;
    for (const ExitPoint& e : model.exit_points()) taps.push_back({e.index, e.backbone_position});
    taps.push_back({kFinalSlot, model.backbone().size()});
    return taps;
}

double accuracy_of(const Tensor& logits, std::span<const int> labels) {
    int correct = 0;
    const int K = logits.dim(1);
    for (int n = 0; n < logits.dim(0); ++n) {
        if (argmax({logits.data() + static_cast<std::size_t>(n) * K, static_cast<std::size_t>(K)}) ==
            labels[static_cast<std::size_t>(n)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / logits.dim(0);
}

// One cached training step over all exits of `kind`. When the backbone is
// frozen its forward runs uncached and no backbone backward happens at all.
double train_step(EarlyExitModel& model, DistortionKind kind, const Tensor& batch,
                  std::span<const int> labels, bool backbone_frozen,
                  std::vector<double>* exit_acc) {
    const auto taps = exit_taps(model);
    std::vector<Tensor> logits;
    std::vector<Tensor> activations;  // at each tap
    Tensor acts = batch;
    int cursor = 0;
    for (const ExitTap& tap : taps) {
        acts = backbone_frozen
                   ? model.backbone().forward_range(acts, cursor, tap.position)
                   : model.backbone().forward_range_cached(acts, cursor, tap.position);
        cursor = tap.position;
        activations.push_back(acts);
        logits.push_back(model.branch(tap.slot, kind).head.forward_cached(acts));
    }

    const double loss = joint_loss(logits, labels);
    if (exit_acc) {
        exit_acc->clear();
        for (const Tensor& z : logits) exit_acc->push_back(accuracy_of(z, labels));
    }

    // Branch backwards produce the tap gradients.
    std::vector<Tensor> tap_grads;
    for (std::size_t e = 0; e < taps.size(); ++e) {
        const Tensor dlogits = cross_entropy_grad(logits[e], labels);
        tap_grads.push_back(model.branch(taps[e].slot, kind).head.backward(dlogits));
    }

    if (!backbone_frozen) {
        // Backbone backward, injecting each tap gradient at its position.
        Tensor g(activations.back().shape());
        for (int i = model.backbone().size() - 1; i >= 0; --i) {
            for (std::size_t e = 0; e < taps.size(); ++e) {
                if (taps[e].position == i + 1) {
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] += tap_grads[e][j];
                }
            }
            g = model.backbone().layer(i).backward(g);
        }
    }
    return loss;
}

void zero_all_grads(EarlyExitModel& model, DistortionKind kind, bool backbone_frozen) {
    if (!backbone_frozen) model.backbone().zero_grads();
    for (int slot : model.slots()) model.branch(slot, kind).head.zero_grads();
}

struct TrainJob {
    DistortionKind kind;
    bool backbone_frozen;
};

void run_training(EarlyExitModel& model, const LabeledDataset& train,
                  const LabeledDataset& validation, const TrainHyper& hyper, const TrainJob& job,
                  std::ostream* log) {
    hyper.validate();
    const std::size_t batches = train.items.size() / static_cast<std::size_t>(hyper.batch_size);
    if (batches == 0) {
        throw ValueError("training set smaller than one mini-batch (" +
                         std::to_string(train.items.size()) + " < " +
                         std::to_string(hyper.batch_size) + ")");
    }

    auto head_group = branch_params(model, job.kind);
    auto backbone_group = backbone_params(model);
    for (Parameter* p : backbone_group) p->trainable = !job.backbone_frozen;
    for (Parameter* p : head_group) p->trainable = true;

    std::vector<Parameter*> tracked = head_group;
    if (!job.backbone_frozen) tracked.insert(tracked.end(), backbone_group.begin(), backbone_group.end());

    Rng aug_rng(Rng::derive(hyper.seed, 0xA06));
    double best_loss = HUGE_VAL;
    std::vector<Tensor> best_values = snapshot(tracked);
    int epochs_without_improvement = 0;
    int step = 0;

    std::vector<std::size_t> order(train.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(hyper.seed, 0x5E0 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        const double lr_head = cosine_annealing_lr(hyper.lr_head, hyper.lr_min, epoch, hyper.max_epochs);
        const double lr_backbone =
            cosine_annealing_lr(hyper.lr_backbone, hyper.lr_min, epoch, hyper.max_epochs);

        double train_loss = 0.0;
        std::vector<double> acc_sum;
        std::vector<double> acc_batch;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::span<const std::size_t> idx(order.data() + b * hyper.batch_size,
                                                   static_cast<std::size_t>(hyper.batch_size));
            Tensor batch;
            if (job.kind == DistortionKind::Pristine) {
                batch = batch_tensor(train, idx);
            } else {
                std::vector<ImageU8> images;
                images.reserve(idx.size());
                for (std::size_t i : idx) images.push_back(train.items[i].image);
                batch = preprocess_batch(augment_minibatch(images, job.kind, aug_rng));
            }
            const std::vector<int> labels = batch_labels(train, idx);

            zero_all_grads(model, job.kind, job.backbone_frozen);
            train_loss += train_step(model, job.kind, batch, labels, job.backbone_frozen, &acc_batch);
            if (acc_sum.empty()) acc_sum.assign(acc_batch.size(), 0.0);
            for (std::size_t e = 0; e < acc_batch.size(); ++e) acc_sum[e] += acc_batch[e];

            ++step;
            adam_step(head_group, lr_head, hyper.weight_decay, step);
            if (!job.backbone_frozen) {
                adam_step(backbone_group, lr_backbone, hyper.weight_decay, step);
            }
        }

        EvalStats train_stats;
        train_stats.loss = train_loss / static_cast<double>(batches);
        for (double a : acc_sum) train_stats.exit_accuracy.push_back(a / static_cast<double>(batches));
        log_epoch(log, epoch, "train", train_stats);

        const EvalStats val = evaluate_joint(model, job.kind, validation, hyper.batch_size);
        log_epoch(log, epoch, "validation", val);

        if (val.loss < best_loss) {
            best_loss = val.loss;
            best_values = snapshot(tracked);
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
            if (epochs_without_improvement >= hyper.patience_epochs) break;
        }
    }

    restore(tracked, best_values);
    model.backbone().drop_caches();
    for (Parameter* p : backbone_group) p->trainable = true;
}

} // namespace

void TrainHyper::validate() const {
    if (!(lr_head > 0.0f) || !(lr_backbone > 0.0f)) throw ValueError("learning rates must be positive");
    if (weight_decay < 0.0f) throw ValueError("weight decay must be >= 0");
    if (batch_size < 2 || batch_size % 2 != 0) {
        throw ValueError("batch_size must be even and >= 2 (half-batch distortion requires it)");
    }
    if (patience_epochs < 1 || max_epochs < 1) throw ValueError("epoch counts must be >= 1");
    if (lr_min < 0.0f) throw ValueError("lr_min must be >= 0");
}

double joint_loss(const std::vector<Tensor>& per_exit_logits, std::span<const int> labels,
                  std::span<const double> weights) {
    if (per_exit_logits.size() < 2) {
        throw ValueError("joint_loss needs at least 2 exits (sides plus final)");
    }
    if (!weights.empty() && weights.size() != per_exit_logits.size()) {
        throw ValueError("joint_loss: one weight per exit expected");
    }
    const int batch = per_exit_logits.front().dim(0);
    double total = 0.0;
    for (std::size_t e = 0; e < per_exit_logits.size(); ++e) {
        if (per_exit_logits[e].dim(0) != batch) {
            throw ShapeError("joint_loss: exit " + std::to_string(e) + " has batch " +
                             std::to_string(per_exit_logits[e].dim(0)) + ", expected " +
                             std::to_string(batch));
        }
        const double w = weights.empty() ? 1.0 : weights[e];
        if (w != 0.0) total += w * cross_entropy_loss(per_exit_logits[e], labels);
    }
    return total;
}

std::vector<Tensor> per_exit_logits(const EarlyExitModel& model, DistortionKind kind,
                                    const Tensor& batch) {
    std::vector<Tensor> out;
    Tensor acts = batch;
    int cursor = 0;
    for (const ExitTap& tap : exit_taps(model)) {
        acts = model.backbone().forward_range(acts, cursor, tap.position);
        cursor = tap.position;
        out.push_back(model.branch(tap.slot, kind).head.forward(acts));
    }
    return out;
}

EvalStats evaluate_joint(const EarlyExitModel& model, DistortionKind kind,
                         const LabeledDataset& dataset, int batch_size) {
    if (dataset.items.empty()) throw ValueError("evaluate_joint: empty dataset");
    const std::size_t n = dataset.items.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;

    const std::size_t exits = exit_taps(model).size();
    std::vector<int> correct(exits, 0);
    double loss_sum = 0.0;
    std::size_t pos = 0;
    while (pos < n) {
        const std::size_t take = std::min(static_cast<std::size_t>(batch_size), n - pos);
        const std::span<const std::size_t> batch_idx(idx.data() + pos, take);
        const Tensor batch = batch_tensor(dataset, batch_idx);
        const std::vector<int> labels = batch_labels(dataset, batch_idx);
        const std::vector<Tensor> logits = per_exit_logits(model, kind, batch);
        loss_sum += joint_loss(logits, labels) * static_cast<double>(take);
        for (std::size_t e = 0; e < exits; ++e) {
            const int K = logits[e].dim(1);
            for (std::size_t i = 0; i < take; ++i) {
                const std::span<const float> row{logits[e].data() + i * static_cast<std::size_t>(K),
                                                 static_cast<std::size_t>(K)};
                if (argmax(row) == labels[i]) ++correct[e];
            }
        }
        pos += take;
    }

    EvalStats stats;
    stats.loss = loss_sum / static_cast<double>(n);
    for (std::size_t e = 0; e < exits; ++e) {
        stats.exit_accuracy.push_back(static_cast<double>(correct[e]) / static_cast<double>(n));
    }
    return stats;
}

void log_epoch(std::ostream* log, int epoch, const char* split, const EvalStats& stats) {
    if (!log) return;
    const auto old_precision = log->precision(10);
    *log << "epoch=" << epoch << " split=" << split << " loss=" << stats.loss;
    for (std::size_t e = 0; e < stats.exit_accuracy.size(); ++e) {
        const bool final = e + 1 == stats.exit_accuracy.size();
        *log << " acc_" << (final ? std::string("final") : "side" + std::to_string(e + 1)) << "="
             << stats.exit_accuracy[e];
    }
    *log << "\n";
    log->precision(old_precision);
}

void train_pristine(EarlyExitModel& model, const DatasetSplits& data, const TrainHyper& hyper,
                    std::ostream* log) {
    run_training(model, data.train, data.validation, hyper,
                 {DistortionKind::Pristine, /*backbone_frozen=*/false}, log);
}

void finetune_expert(EarlyExitModel& model, DistortionKind kind, const DatasetSplits& data,
                     const TrainHyper& hyper, std::ostream* log) {
    if (kind == DistortionKind::Pristine) {
        throw ValueError("finetune_expert needs blur or noise; pristine comes from train_pristine");
    }
    if (!model.has_branch(1, kind)) model.add_expert_set(kind);

    // Validation happens on a fully distorted copy (uniform levels, fixed seed).
    const LabeledDataset distorted_val = distort_dataset_uniform_levels(
        data.validation, kind, Rng::derive(hyper.seed, 0xF7 + static_cast<std::uint64_t>(kind)));

    run_training(model, data.train, distorted_val, hyper, {kind, /*backbone_frozen=*/true}, log);
}

void calibrate_all(EarlyExitModel& model, const DatasetSplits& data, std::uint64_t seed) {
    for (DistortionKind kind : model.expert_kinds()) {
        const LabeledDataset val =
            kind == DistortionKind::Pristine
                ? data.validation
                : distort_dataset_uniform_levels(data.validation, kind,
                                                 Rng::derive(seed, 0xCA1 + static_cast<std::uint64_t>(kind)));
        if (val.items.empty()) throw ValueError("calibrate_all: empty validation set");

        // Collect per-slot logits for the whole validation set, then fit each
        // branch temperature on its own logits.
        const auto taps = exit_taps(model);
        std::vector<std::vector<float>> logits_data(taps.size());
        std::vector<int> labels;
        const int K = model.class_count();

        const int batch_size = 64;
        std::size_t pos = 0;
        std::vector<std::size_t> idx(val.items.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        while (pos < idx.size()) {
            const std::size_t take = std::min<std::size_t>(batch_size, idx.size() - pos);
            const std::span<const std::size_t> batch_idx(idx.data() + pos, take);
            const Tensor batch = batch_tensor(val, batch_idx);
            const std::vector<Tensor> logits = per_exit_logits(model, kind, batch);
            for (std::size_t e = 0; e < taps.size(); ++e) {
                logits_data[e].insert(logits_data[e].end(), logits[e].data(),
                                      logits[e].data() + logits[e].size());
            }
            for (std::size_t i : batch_idx) labels.push_back(val.items[i].label);
            pos += take;
        }

        for (std::size_t e = 0; e < taps.size(); ++e) {
            Tensor all({static_cast<int>(labels.size()), K}, std::move(logits_data[e]));
            model.branch(taps[e].slot, kind).temperature = fit_temperature(all, labels);
        }
    }
}

} // namespace eeo
