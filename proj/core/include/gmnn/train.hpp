#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "gmnn/hierarchy.hpp"
#include "gmnn/metrics.hpp"
#include "gmnn/model.hpp"
#include "gmnn/optimizer.hpp"

namespace gmnn {

struct TrainConfig {
  SgdOptions sgd;
  std::size_t batch = 4;
  std::size_t subsets = 1;     // L
  std::size_t iterations = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

// Graph structure and canonical-order labels, computed once per graph.
struct PreparedGraph {
  GraphHierarchy hierarchy;
  std::vector<Label> labels;
};

PreparedGraph prepare_graph(const ModelConfig& config, const EventGraph& graph);

// Contiguous [begin, end) ranges; the first n % L subsets get one extra graph.
std::vector<std::pair<std::size_t, std::size_t>> subset_ranges(std::size_t n, std::size_t subsets);

// Graph indices of each batch for one pass over `range`, shuffled by
// (seed, iteration).
std::vector<std::vector<std::size_t>> iteration_batches(std::pair<std::size_t, std::size_t> range,
                                                        std::size_t batch, std::uint64_t seed,
                                                        std::size_t iteration);

// One stacked forward/backward pass and an SGD update. Returns the loss.
double train_step(ModelParams& model, std::span<const PreparedGraph* const> batch, SgdState& state);

// Logits of every graph in one stacked pass, each in its input order.
std::vector<Matrix> predict_batch(const ModelParams& model, std::span<const PreparedGraph* const> graphs);

struct IterationStats {
  std::size_t iteration = 0;
  std::size_t subset = 0;
  std::size_t steps = 0;  // optimizer steps so far
  double loss = 0.0;      // mean batch loss of this iteration
};

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per iteration
  std::size_t steps = 0;
  std::size_t iterations = 0;
};

// Return false to stop early.
using TrainCallback = std::function<bool(const IterationStats&, const ModelParams&)>;

// Iteration t trains on subset t mod L, one pass over its batches.
TrainResult train(ModelParams& model, std::span<const EventGraph> dataset, const TrainConfig& config,
                  const TrainCallback& callback = {});
TrainResult train(ModelParams& model, std::span<const PreparedGraph> dataset, const TrainConfig& config,
                  const TrainCallback& callback = {});

MetricReport evaluate(const ModelParams& model, std::span<const EventGraph> graphs, double boundary_radius);
double training_accuracy(const ModelParams& model, std::span<const PreparedGraph> graphs);

}  // namespace gmnn
