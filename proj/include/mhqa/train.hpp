#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mhqa/nc/graph.hpp"
#include "mhqa/nc/param_store.hpp"
#include "mhqa/span_model.hpp"

namespace mhqa {

struct TrainOptions {
    std::size_t epochs = 10;
    std::size_t batch_size = 4;
    double lr = 1e-3;
    double dropout = 0.0;
    double clip_norm = 5.0;  // 0 disables clipping
    std::uint64_t seed = 0;
};

/// Builds the loss of example `index` on a fresh graph.
using ExampleLoss = std::function<nc::Var(nc::Graph&, std::size_t index, TrainContext* train)>;
using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Mini-batch Adam over `num_examples` examples, shuffled every epoch with a
/// generator seeded from `options.seed`. Gradients are averaged over each
/// batch. Returns the mean loss of every epoch.
std::vector<double> train_loop(nc::ParamStore& store, std::size_t num_examples, const TrainOptions& options,
                               const ExampleLoss& loss, const EpochCallback& on_epoch = {});

}  // namespace mhqa
