#include "seganet/model.hpp"

#include <cmath>

namespace seganet {

void ModelConfig::validate() const {
    if (encode_channels.size() < 2)
        throw DataError("encode_channels needs at least two entries");
    for (std::size_t i = 0; i < encode_channels.size(); ++i) {
        if (encode_channels[i] <= 0) throw DataError("encode channels must be positive");
        if (i > 0 && encode_channels[i] <= encode_channels[i - 1])
            throw DataError("encode channels must be strictly increasing");
    }
    if (input_channels <= 0 || output_channels <= 0)
        throw DataError("channel counts must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw DataError("kernel size must be odd and positive");
    if (down_stride != 2) throw DataError("down stride must be 2");
    if (norm_epsilon <= 0.f) throw DataError("norm epsilon must be positive");
    if (threshold <= 0.f || threshold >= 1.f) throw DataError("threshold must be in (0,1)");
}

namespace {

void push_residual_unit(std::vector<ParamSpec>& plan, const std::string& prefix, int in_ch,
                        int out_ch, int stride, int k) {
    plan.push_back({prefix + ".conv1.weight", {out_ch, in_ch, k, k}});
    plan.push_back({prefix + ".conv1.bias", {out_ch}});
    plan.push_back({prefix + ".norm1.gamma", {out_ch}});
    plan.push_back({prefix + ".norm1.beta", {out_ch}});
    plan.push_back({prefix + ".prelu1.slope", {out_ch}});
    plan.push_back({prefix + ".conv2.weight", {out_ch, out_ch, k, k}});
    plan.push_back({prefix + ".conv2.bias", {out_ch}});
    plan.push_back({prefix + ".norm2.gamma", {out_ch}});
    plan.push_back({prefix + ".norm2.beta", {out_ch}});
    plan.push_back({prefix + ".prelu2.slope", {out_ch}});
    if (in_ch != out_ch || stride != 1) {
        plan.push_back({prefix + ".shortcut.weight", {out_ch, in_ch, 1, 1}});
        plan.push_back({prefix + ".shortcut.bias", {out_ch}});
    }
}

void push_up_block(std::vector<ParamSpec>& plan, const std::string& prefix, int in_ch, int out_ch,
                   int k) {
    const int ku = k + 1;  // even kernel: uniform tap coverage at stride 2
    plan.push_back({prefix + ".tconv.weight", {in_ch, out_ch, ku, ku}});
    plan.push_back({prefix + ".tconv.bias", {out_ch}});
    plan.push_back({prefix + ".norm.gamma", {out_ch}});
    plan.push_back({prefix + ".norm.beta", {out_ch}});
    plan.push_back({prefix + ".prelu.slope", {out_ch}});
}

}  // namespace

std::vector<ParamSpec> parameter_plan(const ModelConfig& config) {
    config.validate();
    const std::vector<int>& ch = config.encode_channels;
    const int levels = config.levels();
    const int k = config.kernel_size;

    std::vector<ParamSpec> plan;
    int in_ch = config.input_channels;
    for (int i = 0; i < levels; ++i) {
        push_residual_unit(plan, "enc" + std::to_string(i + 1), in_ch, ch[i], config.down_stride,
                           k);
        in_ch = ch[i];
    }
    push_residual_unit(plan, "bottom", ch[levels - 1], ch[levels], 1, k);
    for (int i = levels - 1; i >= 0; --i) {
        const int dec_ch = (i == levels - 1) ? ch[levels] : ch[i];
        const std::string n = std::to_string(i + 1);
        push_residual_unit(plan, "dec" + n, dec_ch + ch[i], ch[i], 1, k);
        push_up_block(plan, "up" + n, ch[i], i > 0 ? ch[i - 1] : ch[0], k);
    }
    plan.push_back({"head.weight", {config.output_channels, ch[0], 1, 1}});
    plan.push_back({"head.bias", {config.output_channels}});

    std::size_t offset = 0;
    for (ParamSpec& spec : plan) {
        spec.count = 1;
        for (int d : spec.dims) spec.count *= static_cast<std::size_t>(d);
        spec.offset = offset;
        offset += spec.count;
    }
    return plan;
}

std::size_t parameter_count(const ModelConfig& config) {
    std::size_t n = 0;
    for (const ParamSpec& spec : parameter_plan(config)) n += spec.count;
    return n;
}

ModelParams::ModelParams(ModelConfig config, std::vector<float> flat)
    : config_(std::move(config)), specs_(parameter_plan(config_)), flat_(std::move(flat)) {
    if (flat_.size() != parameter_count(config_))
        throw DataError("parameter vector length does not match config");
}

ModelParams ModelParams::build(const ModelConfig& config, std::uint64_t seed) {
    std::vector<ParamSpec> plan = parameter_plan(config);
    std::size_t total = 0;
    for (const ParamSpec& spec : plan) total += spec.count;

    std::vector<float> flat(total, 0.f);
    Rng rng(seed);
    for (const ParamSpec& spec : plan) {
        const bool is_conv = spec.dims.size() == 4;
        if (is_conv) {
            // fan-in over input channels and kernel window; transposed conv
            // weights are [Cin,Cout,k,k] but share the same fan-in product
            const std::size_t fan_in = spec.count / static_cast<std::size_t>(spec.dims[0]);
            const float sigma = std::sqrt(2.0f / static_cast<float>(fan_in));
            for (std::size_t i = 0; i < spec.count; ++i)
                flat[spec.offset + i] = static_cast<float>(rng.normal()) * sigma;
        } else if (spec.name.ends_with("gamma")) {
            for (std::size_t i = 0; i < spec.count; ++i) flat[spec.offset + i] = 1.f;
        } else if (spec.name.ends_with("slope")) {
            for (std::size_t i = 0; i < spec.count; ++i) flat[spec.offset + i] = 0.25f;
        }
        // biases and beta stay zero
    }
    return ModelParams(config, std::move(flat));
}

Tensor<float> forward(const ModelParams& params, const Tensor<float>& batch) {
    const int mult = params.config().spatial_multiple();
    const int H = batch.dim(2), W = batch.dim(3);
    const int pad_h = (mult - H % mult) % mult;
    const int pad_w = (mult - W % mult) % mult;

    std::vector<Tensor<float>> leaves = leaf_parameters<float>(params, false);
    if (pad_h == 0 && pad_w == 0) return seganet_forward(params.config(), leaves, batch);

    Tensor<float> padded =
        pad_reflect2d(batch, pad_h / 2, pad_h - pad_h / 2, pad_w / 2, pad_w - pad_w / 2);
    Tensor<float> prob = seganet_forward(params.config(), leaves, padded);
    return crop2d(prob, pad_h / 2, pad_w / 2, H, W);
}

MaskStack segment_stack(const ModelParams& params, const ImageStack& stack, float threshold) {
    stack.validate();
    MaskStack out;
    out.slices = stack.slices;
    out.height = stack.height;
    out.width = stack.width;
    out.spacing = stack.spacing;
    out.data.resize(stack.data.size());

    for (int s = 0; s < stack.slices; ++s) {
        std::vector<float> slice(stack.slice(s), stack.slice(s) + stack.slice_size());
        Tensor<float> batch({1, 1, stack.height, stack.width}, std::move(slice));
        Tensor<float> prob = forward(params, batch);
        const float* pv = prob.values().data();
        std::uint8_t* mv = out.slice(s);
        for (std::size_t i = 0; i < stack.slice_size(); ++i)
            mv[i] = pv[i] > threshold ? 1 : 0;
    }
    return out;
}

}  // namespace seganet
