#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gmnn/ccm.hpp"
#include "gmnn/graph.hpp"
#include "gmnn/hierarchy.hpp"
#include "gmnn/mlp.hpp"

namespace gmnn {

struct ModelConfig {
  // Channel width per encoder stage; the stem emits widths[0].
  std::vector<std::size_t> widths{32, 64, 128, 256};
  std::vector<std::size_t> k_set = kDefaultKSet;
  std::vector<double> level_weights{0.1, 0.2, 0.3, 0.4};
  std::size_t reduction = 4;
  std::size_t classes = 10;
  std::size_t score_width = 16;
  std::size_t position_width = 16;
  bool per_channel_scores = false;
  bool include_self = true;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 7;

  std::size_t depth() const noexcept { return widths.size(); }
  // Width of the features living on hierarchy level l (0 = input events).
  std::size_t level_width(std::size_t l) const { return l == 0 ? widths.front() : widths[l - 1]; }
  HierarchyOptions hierarchy_options() const;
  void validate() const;
};

ModelConfig parse_model_config(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& config);

struct EncoderStage {
  CcmParams down;   // transition down into level s + 1
  CcmParams mixer;  // mixing on level s + 1
};

struct DecoderStage {
  CcmParams up;     // transition up from level s + 1 to level s
  MlpParams fuse;   // [upsampled ; skip] -> width of level s
  CcmParams mixer;  // mixing on level s
};

struct ModelParams {
  ModelConfig config;
  MlpParams stem;
  std::vector<EncoderStage> encoder;
  MlpParams bottleneck;
  CcmParams bottleneck_mixer;
  std::vector<DecoderStage> decoder;  // decoder[s] targets level s
  MlpParams header;

  // Stable names for every learnable matrix, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> named_parameters();
  std::vector<std::pair<std::string, const Matrix*>> named_parameters() const;
};

ModelParams build_model(const ModelConfig& config);

// Sum of in*out + out over every linear layer plus the fixed level weights.
std::size_t count_parameters(const ModelParams& model);

// Transition down: features on `parent` are passed to the sampled nodes of
// `child` through the child's cross kNN pyramid.
Var transition_down(Tape& t, const CcmParams& params, const GraphLevel& parent, const GraphLevel& child,
                    Var parent_features);

// Transition up: coarse features reach every fine node through the inverse
// lists stored by the paired transition down, then are fused with the skip.
Var transition_up(Tape& t, const CcmParams& params, const MlpParams& fuse, const GraphLevel& coarse,
                  const GraphLevel& fine, Var coarse_features, Var skip_features);

Var mixer_forward(Tape& t, const CcmParams& params, const GraphLevel& level, Var features);

// Logits for level 0 of the hierarchy, in its (canonical) node order.
Var forward_hierarchy(Tape& t, const ModelParams& model, const GraphHierarchy& hierarchy);

struct SegmentationResult {
  Matrix logits;                    // one row per input event
  std::vector<std::int32_t> labels;  // argmax per row
};

SegmentationResult gmnn_forward(const ModelParams& model, const EventGraph& graph);

// Rows of canonical-order logits moved back to input order.
Matrix restore_input_order(const Matrix& canonical, std::span<const std::size_t> order);
std::vector<std::int32_t> argmax_rows(const Matrix& logits);

// Stem input: node coordinates with zero mean and unit spread per axis,
// statistics taken over each graph of a stacked batch separately.
Matrix standardized_coordinates(std::span<const Position> positions, std::span<const std::size_t> offsets);

}  // namespace gmnn
