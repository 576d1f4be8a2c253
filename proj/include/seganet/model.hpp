#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seganet/stack.hpp"
#include "seganet/tensor.hpp"

// Residual U-Net for slice-wise segmentation. The encode path stacks
// stride-2 residual units; the bottom connection is a single residual unit
// at the deepest channel count; the decode path concatenates each encode
// output back in, applies a residual unit, and upsamples with a stride-2
// transposed convolution; a 1x1 convolution plus sigmoid produces the
// per-pixel probability map at the input resolution.

namespace seganet {

struct ModelConfig {
    std::vector<int> encode_channels{16, 32, 64, 128, 256};
    int input_channels = 1;
    int output_channels = 1;
    int kernel_size = 3;
    int down_stride = 2;
    float norm_epsilon = 1e-5f;
    float threshold = 0.5f;

    // Stride-2 stages; the last entry of encode_channels is the bottom unit.
    int levels() const { return static_cast<int>(encode_channels.size()) - 1; }
    // Input dims must be divisible by this after internal padding.
    int spatial_multiple() const { return 1 << levels(); }

    void validate() const;
};

// One named parameter tensor and its slot in the flat vector.
struct ParamSpec {
    std::string name;
    std::vector<int> dims;
    std::size_t offset = 0;
    std::size_t count = 0;
};

// Canonical ordering of every learnable tensor for a config. Offsets
// partition the flat vector exactly; serialization keeps this order.
std::vector<ParamSpec> parameter_plan(const ModelConfig& config);

class ModelParams {
public:
    ModelParams() = default;
    ModelParams(ModelConfig config, std::vector<float> flat);

    // He-style fan-in initialization for conv kernels, zeros for biases and
    // beta, ones for gamma, 0.25 for prelu slopes. Deterministic in the seed.
    static ModelParams build(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const std::vector<ParamSpec>& specs() const { return specs_; }
    const std::vector<float>& flat() const { return flat_; }
    std::vector<float>& flat_mut() { return flat_; }
    std::size_t count() const { return flat_.size(); }

private:
    ModelConfig config_;
    std::vector<ParamSpec> specs_;
    std::vector<float> flat_;
};

std::size_t parameter_count(const ModelConfig& config);

// Parameter tensors in plan order, cast to T, optionally tracked for
// gradients. The graph built by seganet_forward hangs off these leaves.
template <typename T>
std::vector<Tensor<T>> leaf_parameters(const ModelParams& params, bool requires_grad) {
    std::vector<Tensor<T>> leaves;
    leaves.reserve(params.specs().size());
    const std::vector<float>& flat = params.flat();
    for (const ParamSpec& spec : params.specs()) {
        std::vector<T> v(spec.count);
        for (std::size_t i = 0; i < spec.count; ++i)
            v[i] = static_cast<T>(flat[spec.offset + i]);
        leaves.emplace_back(spec.dims, std::move(v), requires_grad);
    }
    return leaves;
}

namespace detail {

// conv -> instance_norm -> prelu twice, plus a 1x1 shortcut whenever channel
// count or stride changes. p walks the leaf tensors in plan order.
template <typename T>
Tensor<T> residual_unit(const Tensor<T>& x, const std::vector<Tensor<T>>& params, std::size_t& p,
                        int in_ch, int out_ch, int stride, int kernel, T epsilon) {
    const int pad = (kernel - 1) / 2;
    Tensor<T> h = conv2d(x, params[p], params[p + 1], stride, pad);
    h = instance_norm(h, params[p + 2], params[p + 3], epsilon);
    h = prelu(h, params[p + 4]);
    p += 5;
    h = conv2d(h, params[p], params[p + 1], 1, pad);
    h = instance_norm(h, params[p + 2], params[p + 3], epsilon);
    h = prelu(h, params[p + 4]);
    p += 5;
    Tensor<T> shortcut = x;
    if (in_ch != out_ch || stride != 1) {
        shortcut = conv2d(x, params[p], params[p + 1], stride, 0);
        p += 2;
    }
    return add(h, shortcut);
}

// Upsampling uses an even kernel (config.kernel_size + 1) so every output
// pixel receives the same number of kernel taps; odd kernels at stride 2
// produce checkerboard artifacts that slow training badly.
template <typename T>
Tensor<T> up_block(const Tensor<T>& x, const std::vector<Tensor<T>>& params, std::size_t& p,
                   T epsilon) {
    const int kernel = params[p].dim(2);
    const int pad = (kernel - 2) / 2;
    Tensor<T> h = conv_transpose2d(x, params[p], params[p + 1], 2, pad);
    h = instance_norm(h, params[p + 2], params[p + 3], epsilon);
    h = prelu(h, params[p + 4]);
    p += 5;
    return h;
}

}  // namespace detail

// Core forward pass. batch is [B, input_channels, H, W] with H and W already
// divisible by config.spatial_multiple(). params must follow parameter_plan.
template <typename T>
Tensor<T> seganet_forward(const ModelConfig& config, const std::vector<Tensor<T>>& params,
                          const Tensor<T>& batch) {
    config.validate();
    if (batch.ndim() != 4 || batch.dim(1) != config.input_channels)
        throw std::invalid_argument("forward: batch must be [B,input_channels,H,W]");
    if (batch.dim(2) % config.spatial_multiple() != 0 ||
        batch.dim(3) % config.spatial_multiple() != 0)
        throw std::invalid_argument("forward: spatial dims must be divisible by the downsampling factor");
    if (!batch.all_finite()) throw NumericError("forward: non-finite input");

    const T eps = static_cast<T>(config.norm_epsilon);
    const int k = config.kernel_size;
    const std::vector<int>& ch = config.encode_channels;
    const int levels = config.levels();

    std::size_t p = 0;
    std::vector<Tensor<T>> skips;
    skips.reserve(levels);
    Tensor<T> x = batch;
    int in_ch = config.input_channels;
    for (int i = 0; i < levels; ++i) {
        x = detail::residual_unit(x, params, p, in_ch, ch[i], config.down_stride, k, eps);
        skips.push_back(x);
        in_ch = ch[i];
    }
    x = detail::residual_unit(x, params, p, ch[levels - 1], ch[levels], 1, k, eps);

    for (int i = levels - 1; i >= 0; --i) {
        Tensor<T> merged = concat_channels(x, skips[i]);
        const int dec_ch = (i == levels - 1) ? ch[levels] : ch[i];
        x = detail::residual_unit(merged, params, p, dec_ch + ch[i], ch[i], 1, k, eps);
        x = detail::up_block(x, params, p, eps);
    }

    x = conv2d(x, params[p], params[p + 1], 1, 0);
    p += 2;
    if (p != params.size()) throw std::logic_error("forward: parameter plan mismatch");
    return sigmoid(x);
}

// Inference entry point: reflection-pads any input up to the required
// multiple, runs the network without gradient tracking, and crops the
// probability map back to the input dims.
Tensor<float> forward(const ModelParams& params, const Tensor<float>& batch);

// Slice-by-slice segmentation of a stack. Voxels with probability strictly
// greater than threshold become foreground. Spacing metadata passes through.
MaskStack segment_stack(const ModelParams& params, const ImageStack& stack, float threshold);

}  // namespace seganet
