#include "gmnn/train.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "gmnn/error.hpp"
#include "gmnn/loss.hpp"

namespace gmnn {

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  if (subsets == 0) throw ConfigError("subset count must be at least 1");
  if (!(sgd.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (sgd.momentum < 0.0 || sgd.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (sgd.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

PreparedGraph prepare_graph(const ModelConfig& config, const EventGraph& graph) {
  if (!graph.has_labels()) throw LabelError("training requires labeled graphs");
  PreparedGraph p;
  p.hierarchy = build_hierarchy(graph, config.hierarchy_options());
  p.labels.reserve(graph.size());
  for (const std::size_t i : p.hierarchy.canonical_order) {
    const ClassId l = graph.labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= config.classes) {
      throw LabelError("label " + std::to_string(l) + " outside [0, " + std::to_string(config.classes) + ")");
    }
    p.labels.push_back(l);
  }
  return p;
}

std::vector<std::pair<std::size_t, std::size_t>> subset_ranges(std::size_t n, std::size_t subsets) {
  if (subsets == 0) throw ConfigError("subset count must be at least 1");
  if (subsets > n) throw ConfigError("more subsets than graphs");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < subsets; ++s) {
    const std::size_t size = n / subsets + (s < n % subsets ? 1 : 0);
    out.emplace_back(begin, begin + size);
    begin += size;
  }
  return out;
}

std::vector<std::vector<std::size_t>> iteration_batches(std::pair<std::size_t, std::size_t> range,
                                                        std::size_t batch, std::uint64_t seed,
                                                        std::size_t iteration) {
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(range.second - range.first);
  std::iota(order.begin(), order.end(), range.first);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + iteration);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch)));
  }
  return out;
}

namespace {

GraphHierarchy stack(std::span<const PreparedGraph* const> graphs, std::vector<Label>* labels) {
  std::vector<const GraphHierarchy*> parts;
  for (const PreparedGraph* g : graphs) {
    parts.push_back(&g->hierarchy);
    if (labels != nullptr) labels->insert(labels->end(), g->labels.begin(), g->labels.end());
  }
  return parts.size() == 1 ? *parts.front() : merge_hierarchies(parts);
}

}  // namespace

double train_step(ModelParams& model, std::span<const PreparedGraph* const> batch, SgdState& state) {
  if (batch.empty()) throw ConfigError("empty batch");
  std::vector<Label> labels;
  const GraphHierarchy h = stack(batch, &labels);

  Tape t;
  const Var logits = forward_hierarchy(t, model, h);
  check_finite(t.value(logits), "logits");
  LossResult loss = batch_cross_entropy(t.value(logits), labels, h.graph_offsets);
  t.backward(logits, loss.grad);

  const auto named = model.named_parameters();
  std::vector<Matrix*> params;
  std::vector<Matrix> grads;
  params.reserve(named.size());
  grads.reserve(named.size());
  const auto computed = t.parameter_gradients();
  for (const auto& [name, p] : named) {
    params.push_back(p);
    const auto it = std::find_if(computed.begin(), computed.end(), [p](const auto& e) { return e.first == p; });
    grads.push_back(it == computed.end() ? Matrix(p->rows(), p->cols()) : it->second);
    check_finite(grads.back(), name);
  }
  sgd_step(params, grads, state);
  return loss.loss;
}

std::vector<Matrix> predict_batch(const ModelParams& model, std::span<const PreparedGraph* const> graphs) {
  if (graphs.empty()) return {};
  const GraphHierarchy h = stack(graphs, nullptr);
  Tape t(false);
  const Matrix& logits = t.value(forward_hierarchy(t, model, h));
  check_finite(logits, "logits");
  std::vector<Matrix> out;
  for (std::size_t g = 0; g < h.graph_count(); ++g) {
    const std::size_t begin = h.graph_offsets[g], end = h.graph_offsets[g + 1];
    Matrix canonical(end - begin, logits.cols());
    for (std::size_t i = begin; i < end; ++i) {
      const auto src = logits.row(i);
      std::copy(src.begin(), src.end(), canonical.row(i - begin).begin());
    }
    std::vector<std::size_t> order(h.canonical_order.begin() + static_cast<std::ptrdiff_t>(begin),
                                   h.canonical_order.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto& o : order) o -= begin;
    out.push_back(restore_input_order(canonical, order));
  }
  return out;
}

TrainResult train(ModelParams& model, std::span<const EventGraph> dataset, const TrainConfig& config,
                  const TrainCallback& callback) {
  if (dataset.empty()) throw ConfigError("training needs at least one graph");
  std::vector<PreparedGraph> prepared;
  prepared.reserve(dataset.size());
  for (const auto& g : dataset) prepared.push_back(prepare_graph(model.config, g));
  return train(model, std::span<const PreparedGraph>(prepared), config, callback);
}

TrainResult train(ModelParams& model, std::span<const PreparedGraph> dataset, const TrainConfig& config,
                  const TrainCallback& callback) {
  config.validate();
  if (dataset.empty()) throw ConfigError("training needs at least one graph");
  const auto ranges = subset_ranges(dataset.size(), config.subsets);
  SgdState state{config.sgd, {}};
  TrainResult result;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const std::size_t subset = it % config.subsets;
    double sum = 0.0;
    const auto batches = iteration_batches(ranges[subset], config.batch, config.seed, it);
    for (const auto& members : batches) {
      std::vector<const PreparedGraph*> batch;
      for (const std::size_t i : members) batch.push_back(&dataset[i]);
      sum += train_step(model, batch, state);
      ++result.steps;
    }
    const double mean = sum / static_cast<double>(batches.size());
    result.loss_curve.push_back(mean);
    result.iterations = it + 1;
    if (callback && !callback(IterationStats{it, subset, result.steps, mean}, model)) break;
  }
  return result;
}

MetricReport evaluate(const ModelParams& model, std::span<const EventGraph> graphs, double boundary_radius) {
  MetricAccumulator acc(model.config.classes, boundary_radius);
  for (const auto& g : graphs) {
    if (!g.has_labels()) throw LabelError("evaluation requires labeled graphs");
    const SegmentationResult r = gmnn_forward(model, g);
    acc.add(r.labels, g.labels, g);
  }
  return acc.report();
}

double training_accuracy(const ModelParams& model, std::span<const PreparedGraph> graphs) {
  std::vector<const PreparedGraph*> all;
  for (const auto& g : graphs) all.push_back(&g);
  std::size_t hits = 0, total = 0;
  const GraphHierarchy h = stack(all, nullptr);
  Tape t(false);
  const auto pred = argmax_rows(t.value(forward_hierarchy(t, model, h)));
  std::size_t row = 0;
  for (const auto& g : graphs) {
    for (const Label l : g.labels) hits += pred[row++] == l;
    total += g.labels.size();
  }
  return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace gmnn
