#include "mhqa/train.hpp"

#include <numeric>

namespace mhqa {

std::vector<double> train_loop(nc::ParamStore& store, std::size_t num_examples, const TrainOptions& options,
                               const ExampleLoss& loss, const EpochCallback& on_epoch) {
    std::vector<double> history;
    if (num_examples == 0) {
        return history;
    }
    Rng rng(options.seed);
    TrainContext train{&rng, options.dropout};
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    std::vector<std::size_t> order(num_examples);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order.begin(), order.end());
        double total = 0.0;
        for (std::size_t begin = 0; begin < num_examples; begin += batch) {
            const std::size_t end = std::min(num_examples, begin + batch);
            store.zero_grad();
            for (std::size_t i = begin; i < end; ++i) {
                nc::Graph g(&store);
                nc::Var l = loss(g, order[i], &train);
                total += l.value()[0];
                g.backward(l);
            }
            store.scale_grad(1.0 / static_cast<double>(end - begin));
            if (options.clip_norm > 0.0) {
                nc::clip_grad_norm(store, options.clip_norm);
            }
            nc::adam_step(store, {options.lr});
        }
        history.push_back(total / static_cast<double>(num_examples));
        if (on_epoch) {
            on_epoch(epoch, history.back());
        }
    }
    return history;
}

}  // namespace mhqa
