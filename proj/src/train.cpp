#include "seganet/train.hpp"

#include <cmath>
#include <string>

#include "seganet/loss.hpp"

namespace seganet {

void TrainConfig::validate() const {
    if (iterations <= 0) throw DataError("iterations must be positive");
    if (batch_size <= 0) throw DataError("batch size must be positive");
    if (dice_smooth <= 0.f) throw DataError("dice smooth must be positive");
    if (checkpoint_every < 0) throw DataError("checkpoint interval must be non-negative");
    adam.validate();
    augment.validate();
}

std::vector<int> sample_minibatch_indices(int pool_size, int batch_size, Rng& rng) {
    if (pool_size <= 0) throw DataError("cannot sample from an empty dataset");
    std::vector<int> idx(batch_size);
    for (int i = 0; i < batch_size; ++i) idx[i] = rng.uniform_int(pool_size);
    return idx;
}

namespace {

// Stacks augmented slices into [B,1,H,W] image and target tensors.
void build_batch(const std::vector<SliceSample>& dataset, const std::vector<int>& indices,
                 const AugmentSpec& spec, std::uint64_t seed, int iteration,
                 Tensor<float>& images, Tensor<float>& targets) {
    const int B = static_cast<int>(indices.size());
    const int H = dataset[0].height, W = dataset[0].width;
    const std::size_t N = static_cast<std::size_t>(H) * W;

    std::vector<float> img(static_cast<std::size_t>(B) * N);
    std::vector<float> tgt(static_cast<std::size_t>(B) * N);
    for (int b = 0; b < B; ++b) {
        Rng sub = Rng::substream(seed, static_cast<std::uint64_t>(iteration),
                                 static_cast<std::uint64_t>(b));
        SliceSample s = augment_pipeline(dataset[indices[b]], spec, sub);
        for (std::size_t i = 0; i < N; ++i) {
            img[static_cast<std::size_t>(b) * N + i] = s.image[i];
            tgt[static_cast<std::size_t>(b) * N + i] = static_cast<float>(s.mask[i]);
        }
    }
    images = Tensor<float>({B, 1, H, W}, std::move(img));
    targets = Tensor<float>({B, 1, H, W}, std::move(tgt));
}

}  // namespace

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::vector<SliceSample>& dataset, const CheckpointHook& on_checkpoint) {
    model_config.validate();
    train_config.validate();
    if (dataset.empty()) throw DataError("training dataset is empty");
    const int H = dataset[0].height, W = dataset[0].width;
    for (const SliceSample& s : dataset) {
        s.validate();
        if (s.height != H || s.width != W)
            throw DataError("all training slices must share dims");
    }

    const int mult = model_config.spatial_multiple();
    const int pad_h = (mult - H % mult) % mult;
    const int pad_w = (mult - W % mult) % mult;

    ModelParams params = ModelParams::build(model_config, train_config.seed);
    AdamState<float> adam(params.count());
    Rng sampler(Rng::substream(train_config.seed, 0x5a, 0).next_u64());

    LossTrace trace;
    trace.reserve(train_config.iterations);
    std::vector<float> grads(params.count());

    for (int iter = 0; iter < train_config.iterations; ++iter) {
        std::vector<int> indices = sample_minibatch_indices(static_cast<int>(dataset.size()),
                                                            train_config.batch_size, sampler);
        Tensor<float> images, targets;
        build_batch(dataset, indices, train_config.augment, train_config.seed, iter, images,
                    targets);
        if (pad_h > 0 || pad_w > 0) {
            // reflect both so padded pixels keep a consistent image/label pair
            images = pad_reflect2d(images, pad_h / 2, pad_h - pad_h / 2, pad_w / 2,
                                   pad_w - pad_w / 2);
            targets = pad_reflect2d(targets, pad_h / 2, pad_h - pad_h / 2, pad_w / 2,
                                    pad_w - pad_w / 2);
        }

        std::vector<Tensor<float>> leaves = leaf_parameters<float>(params, true);
        Tensor<float> prob = seganet_forward(model_config, leaves, images);
        Tensor<float> loss = dice_loss(prob, targets, train_config.dice_smooth);

        const float loss_value = loss.item();
        if (!std::isfinite(loss_value))
            throw NumericError("training diverged: non-finite loss at iteration " +
                               std::to_string(iter));
        trace.push_back(loss_value);

        loss.backward();
        const std::vector<ParamSpec>& specs = params.specs();
        for (std::size_t s = 0; s < specs.size(); ++s) {
            const std::vector<float>& g = leaves[s].grad();
            std::copy(g.begin(), g.end(), grads.begin() + specs[s].offset);
        }
        adam_step(params.flat_mut(), grads, adam, train_config.adam);

        if (on_checkpoint && train_config.checkpoint_every > 0 &&
            (iter + 1) % train_config.checkpoint_every == 0)
            on_checkpoint(iter + 1, params);
    }
    return TrainResult{std::move(params), std::move(trace)};
}

}  // namespace seganet
