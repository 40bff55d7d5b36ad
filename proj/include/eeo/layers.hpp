#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eeo/tensor.hpp"

namespace eeo {

enum class LayerKind : std::uint32_t {
    Conv2d = 0,
    Dense = 1,
    ReLU = 2,
    MaxPool2d = 3,
    GlobalAvgPool = 4,
    Flatten = 5,
};

std::string layer_kind_name(LayerKind kind);

/// Declarative layer description. Output shape and MAC cost are pure
/// functions of the input shape and these hyperparameters.
struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;
    int stride = 1;
    int padding = 0;
    int in_features = 0;
    int out_features = 0;
    int pool = 2;

    static LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride = 1, int padding = 0);
    static LayerSpec dense(int in_features, int out_features);
    static LayerSpec relu();
    static LayerSpec maxpool2d(int window);
    static LayerSpec global_avg_pool();
    static LayerSpec flatten();

    Shape output_shape(const Shape& input) const;
    std::size_t mac_count(const Shape& input) const;
    bool has_params() const { return kind == LayerKind::Conv2d || kind == LayerKind::Dense; }

    bool operator==(const LayerSpec&) const = default;
};

/// Trainable value with its gradient and Adam state, all one shape.
/// When trainable == false the optimizer leaves value bit-identical.
struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    bool trainable = true;

    Parameter() = default;
    explicit Parameter(Shape shape)
        : value(shape), grad(shape), adam_m(shape), adam_v(std::move(shape)) {}

    void zero_grad() { grad.fill(0.0f); }
};

/// Runtime layer: spec + parameters + the forward cache backward consumes.
///
/// forward() is const and touches no per-layer state, so a finalized model
/// may run concurrent inferences. forward_cached()/backward() are the
/// single-threaded training path; backward consumes the cache, so calling it
/// twice without a fresh forward_cached is an error.
class Layer {
public:
    explicit Layer(LayerSpec spec);

    const LayerSpec& spec() const { return spec_; }
    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }
    Parameter& weight() { return params_.at(0); }
    Parameter& bias() { return params_.at(1); }
    const Parameter& weight() const { return params_.at(0); }
    const Parameter& bias() const { return params_.at(1); }

    Tensor forward(const Tensor& x) const;
    Tensor forward_cached(const Tensor& x);
    /// Returns dL/dx and accumulates dL/dparams into each Parameter::grad.
    Tensor backward(const Tensor& dy);

    bool has_cache() const { return has_cache_; }
    void drop_cache();

private:
    Tensor apply(const Tensor& x, bool cache);

    LayerSpec spec_;
    std::vector<Parameter> params_;
    Tensor cached_input_;
    std::vector<std::int32_t> cached_argmax_;
    bool has_cache_ = false;
};

/// Plain layer pipeline. Early-exit taps are handled by the model on top of
/// the layer list; this class only runs contiguous ranges.
class Sequential {
public:
    Sequential() = default;
    explicit Sequential(const std::vector<LayerSpec>& specs);

    void add(const LayerSpec& spec);
    int size() const { return static_cast<int>(layers_.size()); }
    bool empty() const { return layers_.empty(); }
    Layer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }
    const Layer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }

    Tensor forward(const Tensor& x) const;
    /// Runs layers [begin, end); optionally counts layers and MACs executed.
    Tensor forward_range(const Tensor& x, int begin, int end,
                         long* layers_executed = nullptr, std::size_t* macs = nullptr) const;
    Tensor forward_cached(const Tensor& x);
    Tensor forward_range_cached(const Tensor& x, int begin, int end);
    /// Backward through all layers, last to first.
    Tensor backward(const Tensor& dy);

    Shape output_shape(Shape s) const;
    std::size_t mac_count(Shape input) const;
    std::vector<LayerSpec> specs() const;
    std::vector<Parameter*> parameters();
    std::size_t param_count() const;
    void zero_grads();
    void set_trainable(bool trainable);
    void drop_caches();

private:
    std::vector<Layer> layers_;
};

} // namespace eeo
