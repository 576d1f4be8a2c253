#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "seganet/augment.hpp"
#include "seganet/model.hpp"
#include "seganet/optim.hpp"

// Training loop: sample a mini-batch with replacement from the slice pool,
// augment each drawn slice on its own RNG substream, forward, Dice loss,
// backward, Adam step. Deterministic in (seed, dataset, configs).

namespace seganet {

struct TrainConfig {
    int iterations = 500;     // full-scale runs use on the order of 50000
    int batch_size = 8;       // full-scale runs use several hundred slices
    AdamConfig adam;          // learning rate default 1e-4
    std::uint64_t seed = 0;
    float dice_smooth = 1e-5f;
    AugmentSpec augment;      // set probabilities to 0 to train on raw slices
    int checkpoint_every = 0; // 0 = only the implicit final state

    void validate() const;
};

// Per-iteration batch loss values, in order.
using LossTrace = std::vector<float>;

// batch_size indices drawn with replacement from [0, pool_size).
std::vector<int> sample_minibatch_indices(int pool_size, int batch_size, Rng& rng);

struct TrainResult {
    ModelParams params;
    LossTrace trace;
};

// Optional periodic snapshot hook (iteration, params). Called every
// checkpoint_every iterations when that is positive.
using CheckpointHook = std::function<void(int, const ModelParams&)>;

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::vector<SliceSample>& dataset,
                  const CheckpointHook& on_checkpoint = nullptr);

}  // namespace seganet
