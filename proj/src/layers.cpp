#include "eeo/layers.hpp"

#include <Eigen/Dense>

#include <limits>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

using MatXd = Eigen::MatrixXd;

// Inner products run in f64 even though tensors store f32; reductions keep
// enough headroom for finite-difference gradient checks at h=1e-3.

void require_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
    }
}

int conv_out_extent(int in, int kernel, int stride, int padding) {
    const int out = (in + 2 * padding - kernel) / stride + 1;
    if (out <= 0) {
        throw ShapeError("conv2d output extent is non-positive for input " + std::to_string(in) +
                         ", kernel " + std::to_string(kernel) + ", stride " + std::to_string(stride) +
                         ", padding " + std::to_string(padding));
    }
    return out;
}

// Gathers one sample into a (C*k*k, H'*W') patch matrix. Out-of-image taps
// (padding) stay zero.
void im2col(const float* x, int C, int H, int W, int kernel, int stride, int padding,
            int Ho, int Wo, MatXd& cols) {
    cols.setZero(static_cast<Eigen::Index>(C) * kernel * kernel,
                 static_cast<Eigen::Index>(Ho) * Wo);
    for (int c = 0; c < C; ++c) {
        const float* xc = x + static_cast<std::size_t>(c) * H * W;
        for (int kh = 0; kh < kernel; ++kh) {
            for (int kw = 0; kw < kernel; ++kw) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * kernel + kh) * kernel + kw;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int hi = ho * stride - padding + kh;
                    if (hi < 0 || hi >= H) continue;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int wi = wo * stride - padding + kw;
                        if (wi < 0 || wi >= W) continue;
                        cols(row, static_cast<Eigen::Index>(ho) * Wo + wo) =
                            static_cast<double>(xc[hi * W + wi]);
                    }
                }
            }
        }
    }
}

// Scatter-adds a (C*k*k, H'*W') gradient matrix back onto one input sample.
void col2im(const MatXd& cols, int C, int H, int W, int kernel, int stride, int padding,
            int Ho, int Wo, float* dx) {
    for (int c = 0; c < C; ++c) {
        float* dxc = dx + static_cast<std::size_t>(c) * H * W;
        for (int kh = 0; kh < kernel; ++kh) {
            for (int kw = 0; kw < kernel; ++kw) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * kernel + kh) * kernel + kw;
                for (int ho = 0; ho < Ho; ++ho) {
                    const int hi = ho * stride - padding + kh;
                    if (hi < 0 || hi >= H) continue;
                    for (int wo = 0; wo < Wo; ++wo) {
                        const int wi = wo * stride - padding + kw;
                        if (wi < 0 || wi >= W) continue;
                        dxc[hi * W + wi] += static_cast<float>(
                            cols(row, static_cast<Eigen::Index>(ho) * Wo + wo));
                    }
                }
            }
        }
    }
}

} // namespace

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2d: return "Conv2d";
        case LayerKind::Dense: return "Dense";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::MaxPool2d: return "MaxPool2d";
        case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
        case LayerKind::Flatten: return "Flatten";
    }
    return "Unknown";
}

LayerSpec LayerSpec::conv2d(int in_ch, int out_ch, int kernel, int stride, int padding) {
    if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || stride <= 0 || padding < 0) {
        throw ValueError("conv2d spec requires positive channels/kernel/stride and padding >= 0");
    }
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::dense(int in_features, int out_features) {
    if (in_features <= 0 || out_features <= 0) {
        throw ValueError("dense spec requires positive feature counts");
    }
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_features = in_features;
    s.out_features = out_features;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    return s;
}

LayerSpec LayerSpec::maxpool2d(int window) {
    if (window <= 1) throw ValueError("maxpool2d window must be >= 2");
    LayerSpec s;
    s.kind = LayerKind::MaxPool2d;
    s.pool = window;
    return s;
}

LayerSpec LayerSpec::global_avg_pool() {
    LayerSpec s;
    s.kind = LayerKind::GlobalAvgPool;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

Shape LayerSpec::output_shape(const Shape& input) const {
    switch (kind) {
        case LayerKind::Conv2d: {
            if (input.size() != 4) {
                throw ShapeError("Conv2d expects [N,C,H,W], got " + shape_str(input));
            }
            if (input[1] != in_channels) {
                throw ShapeError("Conv2d expects " + std::to_string(in_channels) +
                                 " input channels, got " + std::to_string(input[1]) +
                                 " in " + shape_str(input));
            }
            const int Ho = conv_out_extent(input[2], kernel, stride, padding);
            const int Wo = conv_out_extent(input[3], kernel, stride, padding);
            return {input[0], out_channels, Ho, Wo};
        }
        case LayerKind::Dense: {
            if (input.size() != 2) {
                throw ShapeError("Dense expects [N,F], got " + shape_str(input));
            }
            if (input[1] != in_features) {
                throw ShapeError("Dense expects " + std::to_string(in_features) +
                                 " input features, got " + std::to_string(input[1]));
            }
            return {input[0], out_features};
        }
        case LayerKind::ReLU:
            return input;
        case LayerKind::MaxPool2d: {
            if (input.size() != 4) {
                throw ShapeError("MaxPool2d expects [N,C,H,W], got " + shape_str(input));
            }
            const int Ho = input[2] / pool;
            const int Wo = input[3] / pool;
            if (Ho <= 0 || Wo <= 0) {
                throw ShapeError("MaxPool2d window " + std::to_string(pool) +
                                 " larger than input " + shape_str(input));
            }
            return {input[0], input[1], Ho, Wo};
        }
        case LayerKind::GlobalAvgPool: {
            if (input.size() != 4) {
                throw ShapeError("GlobalAvgPool expects [N,C,H,W], got " + shape_str(input));
            }
            return {input[0], input[1]};
        }
        case LayerKind::Flatten: {
            if (input.size() < 2) {
                throw ShapeError("Flatten expects rank >= 2, got " + shape_str(input));
            }
            int f = 1;
            for (std::size_t i = 1; i < input.size(); ++i) f *= input[i];
            return {input[0], f};
        }
    }
    throw ValueError("unknown layer kind");
}

std::size_t LayerSpec::mac_count(const Shape& input) const {
    const Shape out = output_shape(input);
    switch (kind) {
        case LayerKind::Conv2d:
            return static_cast<std::size_t>(out[0]) * out[1] * out[2] * out[3] *
                   in_channels * kernel * kernel;
        case LayerKind::Dense:
            return static_cast<std::size_t>(input[0]) * in_features * out_features;
        default:
            // Elementwise/pool layers are counted as one op per input element.
            return shape_size(input);
    }
}

Layer::Layer(LayerSpec spec) : spec_(spec) {
    switch (spec_.kind) {
        case LayerKind::Conv2d:
            params_.emplace_back(Shape{spec_.out_channels, spec_.in_channels, spec_.kernel, spec_.kernel});
            params_.emplace_back(Shape{spec_.out_channels});
            break;
        case LayerKind::Dense:
            params_.emplace_back(Shape{spec_.out_features, spec_.in_features});
            params_.emplace_back(Shape{spec_.out_features});
            break;
        default:
            break;
    }
}

Tensor Layer::forward(const Tensor& x) const {
    // const_cast is confined to the cache==false path, which writes no state.
    return const_cast<Layer*>(this)->apply(x, false);
}

Tensor Layer::forward_cached(const Tensor& x) { return apply(x, true); }

void Layer::drop_cache() {
    cached_input_ = Tensor();
    cached_argmax_.clear();
    has_cache_ = false;
}

Tensor Layer::apply(const Tensor& x, bool cache) {
    const Shape out_shape = spec_.output_shape(x.shape());
    Tensor y(out_shape);

    switch (spec_.kind) {
        case LayerKind::Conv2d: {
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            const int O = spec_.out_channels, k = spec_.kernel;
            const int Ho = out_shape[2], Wo = out_shape[3];

            MatXd wm(O, static_cast<Eigen::Index>(C) * k * k);
            const float* wdata = weight().value.data();
            for (Eigen::Index o = 0; o < wm.rows(); ++o) {
                for (Eigen::Index r = 0; r < wm.cols(); ++r) {
                    wm(o, r) = static_cast<double>(wdata[o * wm.cols() + r]);
                }
            }
            Eigen::VectorXd bv(O);
            for (int o = 0; o < O; ++o) bv(o) = static_cast<double>(bias().value[static_cast<std::size_t>(o)]);

            MatXd cols;
            for (int n = 0; n < N; ++n) {
                im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, k,
                       spec_.stride, spec_.padding, Ho, Wo, cols);
                const MatXd out = (wm * cols).colwise() + bv;
                float* yn = y.data() + static_cast<std::size_t>(n) * O * Ho * Wo;
                for (int o = 0; o < O; ++o) {
                    for (int p = 0; p < Ho * Wo; ++p) {
                        yn[static_cast<std::size_t>(o) * Ho * Wo + p] = static_cast<float>(out(o, p));
                    }
                }
            }
            break;
        }
        case LayerKind::Dense: {
            const int N = x.dim(0), F = spec_.in_features, U = spec_.out_features;
            MatXd xm(N, F);
            for (int n = 0; n < N; ++n) {
                for (int f = 0; f < F; ++f) xm(n, f) = static_cast<double>(x.at2(n, f));
            }
            MatXd wm(U, F);
            const float* wdata = weight().value.data();
            for (int u = 0; u < U; ++u) {
                for (int f = 0; f < F; ++f) wm(u, f) = static_cast<double>(wdata[static_cast<std::size_t>(u) * F + f]);
            }
            MatXd ym = xm * wm.transpose();
            for (int n = 0; n < N; ++n) {
                for (int u = 0; u < U; ++u) {
                    y.at2(n, u) = static_cast<float>(ym(n, u) + static_cast<double>(bias().value[static_cast<std::size_t>(u)]));
                }
            }
            break;
        }
        case LayerKind::ReLU: {
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
            break;
        }
        case LayerKind::MaxPool2d: {
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            const int w = spec_.pool, Ho = out_shape[2], Wo = out_shape[3];
            if (cache) cached_argmax_.assign(y.size(), 0);
            std::size_t oi = 0;
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const float* xc = x.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                    for (int ho = 0; ho < Ho; ++ho) {
                        for (int wo = 0; wo < Wo; ++wo, ++oi) {
                            float best = -std::numeric_limits<float>::infinity();
                            int best_idx = 0;
                            for (int dh = 0; dh < w; ++dh) {
                                for (int dw = 0; dw < w; ++dw) {
                                    const int idx = (ho * w + dh) * W + wo * w + dw;
                                    if (xc[idx] > best) {
                                        best = xc[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            y[oi] = best;
                            if (cache) cached_argmax_[oi] = best_idx;
                        }
                    }
                }
            }
            break;
        }
        case LayerKind::GlobalAvgPool: {
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            const double inv = 1.0 / (static_cast<double>(H) * W);
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const float* xc = x.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                    double acc = 0.0;
                    for (int i = 0; i < H * W; ++i) acc += static_cast<double>(xc[i]);
                    y.at2(n, c) = static_cast<float>(acc * inv);
                }
            }
            break;
        }
        case LayerKind::Flatten: {
            y = Tensor(out_shape, x.vec());
            break;
        }
    }

    if (cache) {
        cached_input_ = x;
        has_cache_ = true;
    }
    return y;
}

Tensor Layer::backward(const Tensor& dy) {
    if (!has_cache_) {
        throw Error(layer_kind_name(spec_.kind) +
                    " backward called without a preceding cached forward pass");
    }
    const Tensor& x = cached_input_;
    const Shape out_shape = spec_.output_shape(x.shape());
    require_shape(dy, out_shape, "layer backward gradient");

    Tensor dx(x.shape());

    switch (spec_.kind) {
        case LayerKind::Conv2d: {
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            const int O = spec_.out_channels, k = spec_.kernel;
            const int Ho = out_shape[2], Wo = out_shape[3];
            const Eigen::Index patch = static_cast<Eigen::Index>(C) * k * k;

            MatXd wm(O, patch);
            const float* wdata = weight().value.data();
            for (Eigen::Index o = 0; o < O; ++o) {
                for (Eigen::Index r = 0; r < patch; ++r) wm(o, r) = static_cast<double>(wdata[o * patch + r]);
            }

            MatXd dwm = MatXd::Zero(O, patch);
            Eigen::VectorXd dbv = Eigen::VectorXd::Zero(O);
            MatXd cols, dym(O, static_cast<Eigen::Index>(Ho) * Wo);

            const bool need_dw = weight().trainable;
            const bool need_db = bias().trainable;
            for (int n = 0; n < N; ++n) {
                const float* dyn = dy.data() + static_cast<std::size_t>(n) * O * Ho * Wo;
                for (int o = 0; o < O; ++o) {
                    for (int p = 0; p < Ho * Wo; ++p) {
                        dym(o, p) = static_cast<double>(dyn[static_cast<std::size_t>(o) * Ho * Wo + p]);
                    }
                }
                if (need_dw) {
                    im2col(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, k,
                           spec_.stride, spec_.padding, Ho, Wo, cols);
                    dwm.noalias() += dym * cols.transpose();
                }
                if (need_db) dbv += dym.rowwise().sum();
                const MatXd dcols = wm.transpose() * dym;
                col2im(dcols, C, H, W, k, spec_.stride, spec_.padding, Ho, Wo,
                       dx.data() + static_cast<std::size_t>(n) * C * H * W);
            }

            if (need_dw) {
                float* gw = weight().grad.data();
                for (Eigen::Index o = 0; o < O; ++o) {
                    for (Eigen::Index r = 0; r < patch; ++r) {
                        gw[o * patch + r] += static_cast<float>(dwm(o, r));
                    }
                }
            }
            if (need_db) {
                float* gb = bias().grad.data();
                for (int o = 0; o < O; ++o) gb[o] += static_cast<float>(dbv(o));
            }
            break;
        }
        case LayerKind::Dense: {
            const int N = x.dim(0), F = spec_.in_features, U = spec_.out_features;
            MatXd xm(N, F), dym(N, U);
            for (int n = 0; n < N; ++n) {
                for (int f = 0; f < F; ++f) xm(n, f) = static_cast<double>(x.at2(n, f));
                for (int u = 0; u < U; ++u) dym(n, u) = static_cast<double>(dy.at2(n, u));
            }
            MatXd wm(U, F);
            const float* wdata = weight().value.data();
            for (int u = 0; u < U; ++u) {
                for (int f = 0; f < F; ++f) wm(u, f) = static_cast<double>(wdata[static_cast<std::size_t>(u) * F + f]);
            }

            if (weight().trainable) {
                const MatXd dwm = dym.transpose() * xm;
                float* gw = weight().grad.data();
                for (int u = 0; u < U; ++u) {
                    for (int f = 0; f < F; ++f) gw[static_cast<std::size_t>(u) * F + f] += static_cast<float>(dwm(u, f));
                }
            }
            if (bias().trainable) {
                const Eigen::VectorXd dbv = dym.colwise().sum();
                float* gb = bias().grad.data();
                for (int u = 0; u < U; ++u) gb[u] += static_cast<float>(dbv(u));
            }

            const MatXd dxm = dym * wm;
            for (int n = 0; n < N; ++n) {
                for (int f = 0; f < F; ++f) dx.at2(n, f) = static_cast<float>(dxm(n, f));
            }
            break;
        }
        case LayerKind::ReLU: {
            for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
            break;
        }
        case LayerKind::MaxPool2d: {
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            std::size_t oi = 0;
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    float* dxc = dx.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                    const std::size_t plane = static_cast<std::size_t>(out_shape[2]) * out_shape[3];
                    for (std::size_t p = 0; p < plane; ++p, ++oi) {
                        dxc[cached_argmax_[oi]] += dy[oi];
                    }
                }
            }
            break;
        }
        case LayerKind::GlobalAvgPool: {
            const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
            const float inv = 1.0f / static_cast<float>(H * W);
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    float* dxc = dx.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
                    const float g = dy.at2(n, c) * inv;
                    for (int i = 0; i < H * W; ++i) dxc[i] = g;
                }
            }
            break;
        }
        case LayerKind::Flatten: {
            dx = Tensor(x.shape(), dy.vec());
            break;
        }
    }

    drop_cache();
    return dx;
}

Sequential::Sequential(const std::vector<LayerSpec>& specs) {
    for (const auto& s : specs) add(s);
}

void Sequential::add(const LayerSpec& spec) { layers_.emplace_back(spec); }

Tensor Sequential::forward(const Tensor& x) const {
    return forward_range(x, 0, size());
}

Tensor Sequential::forward_range(const Tensor& x, int begin, int end,
                                 long* layers_executed, std::size_t* macs) const {
    Tensor h = x;
    for (int i = begin; i < end; ++i) {
        if (macs) *macs += layers_[static_cast<std::size_t>(i)].spec().mac_count(h.shape());
        h = layers_[static_cast<std::size_t>(i)].forward(h);
        if (layers_executed) ++*layers_executed;
    }
    return h;
}

Tensor Sequential::forward_cached(const Tensor& x) {
    return forward_range_cached(x, 0, size());
}

Tensor Sequential::forward_range_cached(const Tensor& x, int begin, int end) {
    Tensor h = x;
    for (int i = begin; i < end; ++i) {
        h = layers_[static_cast<std::size_t>(i)].forward_cached(h);
    }
    return h;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor g = dy;
    for (int i = size() - 1; i >= 0; --i) {
        g = layers_[static_cast<std::size_t>(i)].backward(g);
    }
    return g;
}

Shape Sequential::output_shape(Shape s) const {
    for (const auto& l : layers_) s = l.spec().output_shape(s);
    return s;
}

std::size_t Sequential::mac_count(Shape input) const {
    std::size_t macs = 0;
    for (const auto& l : layers_) {
        macs += l.spec().mac_count(input);
        input = l.spec().output_shape(input);
    }
    return macs;
}

std::vector<LayerSpec> Sequential::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l.spec());
    return out;
}

std::vector<Parameter*> Sequential::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        for (auto& p : l.params()) out.push_back(&p);
    }
    return out;
}

std::size_t Sequential::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
        for (const auto& p : l.params()) n += p.value.size();
    }
    return n;
}

void Sequential::zero_grads() {
    for (auto& l : layers_) {
        for (auto& p : l.params()) p.zero_grad();
    }
}

void Sequential::set_trainable(bool trainable) {
    for (auto& l : layers_) {
        for (auto& p : l.params()) p.trainable = trainable;
    }
}

void Sequential::drop_caches() {
    for (auto& l : layers_) l.drop_cache();
}

} // namespace eeo
