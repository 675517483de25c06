#include "gmnn/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gmnn/error.hpp"

namespace gmnn {

namespace {

std::vector<const Neighborhoods*> level_rows(const KnnPyramid& pyramid) {
  std::vector<const Neighborhoods*> rows;
  for (const auto& level : pyramid.levels) rows.push_back(&level.rows);
  return rows;
}

template <class MatrixPtr>
void visit_mlp(std::vector<std::pair<std::string, MatrixPtr>>& out, const std::string& prefix, auto& mlp) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    out.emplace_back(prefix + ".l" + std::to_string(i) + ".weight", &mlp.layers[i].weight);
    out.emplace_back(prefix + ".l" + std::to_string(i) + ".bias", &mlp.layers[i].bias);
  }
}

template <class MatrixPtr>
void visit_ccm(std::vector<std::pair<std::string, MatrixPtr>>& out, const std::string& prefix, auto& ccm) {
  for (std::size_t k = 0; k < ccm.levels.size(); ++k) {
    const std::string p = prefix + ".k" + std::to_string(k);
    visit_mlp(out, p + ".g1", ccm.levels[k].channel_mix);
    visit_mlp(out, p + ".delta", ccm.levels[k].position);
    visit_mlp(out, p + ".g2", ccm.levels[k].score);
    visit_mlp(out, p + ".g3", ccm.levels[k].value);
  }
  if (ccm.inter_set) visit_mlp(out, prefix + ".inter", *ccm.inter_set);
}

template <class MatrixPtr>
std::vector<std::pair<std::string, MatrixPtr>> collect(auto& model) {
  std::vector<std::pair<std::string, MatrixPtr>> out;
  visit_mlp(out, "stem", model.stem);
  for (std::size_t s = 0; s < model.encoder.size(); ++s) {
    visit_ccm(out, "encoder" + std::to_string(s) + ".down", model.encoder[s].down);
    visit_ccm(out, "encoder" + std::to_string(s) + ".mixer", model.encoder[s].mixer);
  }
  visit_mlp(out, "bottleneck", model.bottleneck);
  visit_ccm(out, "bottleneck.mixer", model.bottleneck_mixer);
  for (std::size_t s = model.decoder.size(); s-- > 0;) {
    visit_ccm(out, "decoder" + std::to_string(s) + ".up", model.decoder[s].up);
    visit_mlp(out, "decoder" + std::to_string(s) + ".fuse", model.decoder[s].fuse);
    visit_ccm(out, "decoder" + std::to_string(s) + ".mixer", model.decoder[s].mixer);
  }
  visit_mlp(out, "header", model.header);
  return out;
}

std::size_t ccm_weight_count(const CcmParams& c) { return c.weights.size(); }

}  // namespace

HierarchyOptions ModelConfig::hierarchy_options() const {
  HierarchyOptions h;
  h.k_set = k_set;
  h.reduction = reduction;
  h.depth = depth();
  h.include_self = include_self;
  return h;
}

void ModelConfig::validate() const {
  if (widths.empty()) throw ConfigError("model needs at least one encoder stage");
  for (const auto w : widths) {
    if (w == 0) throw ConfigError("channel widths must be positive");
  }
  validate_k_set(k_set);
  if (level_weights.size() != k_set.size()) throw ConfigError("one level weight per k is required");
  validate_level_weights(level_weights);
  if (reduction == 0) throw ConfigError("reduction factor must be positive");
  if (classes < 1) throw ConfigError("at least one class is required");
  if (score_width == 0 || position_width == 0) throw ConfigError("score and position widths must be positive");
}

ModelConfig parse_model_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  try {
    if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<std::size_t>>();
    if (j.contains("k_set")) {
      c.k_set = j.at("k_set").get<std::vector<std::size_t>>();
      c.level_weights = ramp_level_weights(c.k_set.size());
    }
    if (j.contains("level_weights")) c.level_weights = j.at("level_weights").get<std::vector<double>>();
    c.reduction = j.value("reduction", c.reduction);
    c.classes = j.value("classes", c.classes);
    c.score_width = j.value("score_width", c.score_width);
    c.position_width = j.value("position_width", c.position_width);
    c.per_channel_scores = j.value("per_channel_scores", c.per_channel_scores);
    c.include_self = j.value("include_self", c.include_self);
    if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"widths", c.widths},
                        {"k_set", c.k_set},
                        {"level_weights", c.level_weights},
                        {"reduction", c.reduction},
                        {"classes", c.classes},
                        {"score_width", c.score_width},
                        {"position_width", c.position_width},
                        {"per_channel_scores", c.per_channel_scores},
                        {"include_self", c.include_self},
                        {"activation", std::string(activation_name(c.activation))},
                        {"seed", c.seed}};
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::named_parameters() { return collect<Matrix*>(*this); }

std::vector<std::pair<std::string, const Matrix*>> ModelParams::named_parameters() const {
  return collect<const Matrix*>(*this);
}

ModelParams build_model(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const Activation act = config.activation;
  auto ccm = [&](std::size_t in, std::size_t out, bool inter) {
    CcmShape shape;
    shape.in = in;
    shape.out = out;
    shape.score_width = config.score_width;
    shape.position_width = config.position_width;
    shape.levels = config.k_set.size();
    shape.inter_set = inter;
    shape.per_channel_scores = config.per_channel_scores;
    shape.activation = act;
    return make_ccm(shape, config.level_weights, rng);
  };
  auto mlp = [&](std::initializer_list<std::size_t> dims, Activation final_act) {
    const std::vector<std::size_t> d(dims);
    return make_mlp(d, act, final_act, rng);
  };

  ModelParams m;
  m.config = config;
  const std::size_t w0 = config.level_width(0);
  m.stem = mlp({3, w0, w0}, act);
  for (std::size_t s = 0; s < config.depth(); ++s) {
    const std::size_t in = config.level_width(s), out = config.level_width(s + 1);
    m.encoder.push_back(EncoderStage{ccm(in, out, false), ccm(out, out, true)});
  }
  const std::size_t deepest = config.level_width(config.depth());
  m.bottleneck = mlp({deepest, deepest}, act);
  m.bottleneck_mixer = ccm(deepest, deepest, true);
  m.decoder.resize(config.depth());
  for (std::size_t s = config.depth(); s-- > 0;) {
    const std::size_t coarse = config.level_width(s + 1), fine = config.level_width(s);
    DecoderStage stage;
    stage.up = ccm(coarse, fine, false);
    stage.fuse = mlp({2 * fine, fine}, act);
    stage.mixer = ccm(fine, fine, true);
    m.decoder[s] = std::move(stage);
  }
  m.header = mlp({w0, w0, config.classes}, Activation::kIdentity);
  return m;
}

std::size_t count_parameters(const ModelParams& model) {
  std::size_t total = 0;
  for (const auto& [name, matrix] : model.named_parameters()) total += matrix->size();
  for (const auto& s : model.encoder) total += ccm_weight_count(s.down) + ccm_weight_count(s.mixer);
  total += ccm_weight_count(model.bottleneck_mixer);
  for (const auto& s : model.decoder) total += ccm_weight_count(s.up) + ccm_weight_count(s.mixer);
  return total;
}

namespace {

// The child must have been sampled from exactly this parent.
bool sampled_from(const GraphLevel& child, const GraphLevel& parent) {
  if (child.depth != parent.depth + 1 || child.parent_size != parent.size() || !child.has_down_maps()) return false;
  if (child.parent_indices.size() != child.size()) return false;
  for (std::size_t i = 0; i < child.size(); ++i) {
    const NodeIndex p = child.parent_indices[i];
    if (p >= parent.size() || !(parent.positions[p] == child.positions[i])) return false;
  }
  return true;
}

}  // namespace

Var transition_down(Tape& t, const CcmParams& params, const GraphLevel& parent, const GraphLevel& child,
                    Var parent_features) {
  if (!sampled_from(child, parent)) {
    throw StructuralError("transition down: level " + std::to_string(child.depth) +
                          " was not sampled from level " + std::to_string(parent.depth));
  }
  const auto rows = level_rows(child.down);
  return ccm_forward(t, params, child.positions, parent.positions, rows, parent_features);
}

Var transition_up(Tape& t, const CcmParams& params, const MlpParams& fuse, const GraphLevel& coarse,
                  const GraphLevel& fine, Var coarse_features, Var skip_features) {
  // Pairing: the coarse level must carry the maps of the transition down
  // that produced it from exactly this fine level.
  if (!sampled_from(coarse, fine) || coarse.up.size() != params.levels.size()) {
    throw StructuralError("transition up: level " + std::to_string(coarse.depth) +
                          " has no stored maps into level " + std::to_string(fine.depth));
  }
  std::vector<const Neighborhoods*> rows;
  for (const auto& r : coarse.up) {
    if (r.rows() != fine.size()) throw StructuralError("transition up: inverse rows do not cover the fine level");
    rows.push_back(&r);
  }
  const Var up = ccm_forward(t, params, fine.positions, coarse.positions, rows, coarse_features);
  return mlp_forward(t, fuse, ops::concat_cols(t, up, skip_features));
}

Var mixer_forward(Tape& t, const CcmParams& params, const GraphLevel& level, Var features) {
  const auto rows = level_rows(level.pyramid);
  return ccm_forward(t, params, level.positions, level.positions, rows, features, &level.mixer_inverse);
}

Var forward_hierarchy(Tape& t, const ModelParams& model, const GraphHierarchy& hierarchy) {
  const std::size_t depth = model.config.depth();
  if (hierarchy.levels.size() != depth + 1) {
    throw StructuralError("hierarchy has " + std::to_string(hierarchy.levels.size()) + " levels, model needs " +
                          std::to_string(depth + 1));
  }
  const GraphLevel& root = hierarchy.levels.front();
  Matrix coords = standardized_coordinates(root.positions, hierarchy.graph_offsets);

  std::vector<Var> skips;
  Var x = mlp_forward(t, model.stem, t.constant(std::move(coords)));
  skips.push_back(x);
  for (std::size_t s = 0; s < depth; ++s) {
    const GraphLevel& parent = hierarchy.levels[s];
    const GraphLevel& child = hierarchy.levels[s + 1];
    x = transition_down(t, model.encoder[s].down, parent, child, x);
    x = mixer_forward(t, model.encoder[s].mixer, child, x);
    skips.push_back(x);
  }
  x = mlp_forward(t, model.bottleneck, x);
  x = mixer_forward(t, model.bottleneck_mixer, hierarchy.levels[depth], x);
  for (std::size_t s = depth; s-- > 0;) {
    const DecoderStage& stage = model.decoder[s];
    x = transition_up(t, stage.up, stage.fuse, hierarchy.levels[s + 1], hierarchy.levels[s], x, skips[s]);
    x = mixer_forward(t, stage.mixer, hierarchy.levels[s], x);
  }
  return mlp_forward(t, model.header, x);
}

Matrix restore_input_order(const Matrix& canonical, std::span<const std::size_t> order) {
  if (order.size() != canonical.rows()) throw ShapeError("order length must match logit rows");
  Matrix out(canonical.rows(), canonical.cols());
  for (std::size_t p = 0; p < order.size(); ++p) {
    const auto src = canonical.row(p);
    std::copy(src.begin(), src.end(), out.row(order[p]).begin());
  }
  return out;
}

Matrix standardized_coordinates(std::span<const Position> positions, std::span<const std::size_t> offsets) {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != positions.size()) {
    throw ShapeError("graph offsets must cover every node");
  }
  Matrix out(positions.size(), 3);
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    const std::size_t begin = offsets[g], end = offsets[g + 1];
    if (begin == end) continue;
    const double n = static_cast<double>(end - begin);
    double mean[3] = {0, 0, 0}, var[3] = {0, 0, 0};
    for (std::size_t i = begin; i < end; ++i) {
      mean[0] += positions[i].x;
      mean[1] += positions[i].y;
      mean[2] += positions[i].t;
    }
    for (double& m : mean) m /= n;
    for (std::size_t i = begin; i < end; ++i) {
      const double d[3] = {positions[i].x - mean[0], positions[i].y - mean[1], positions[i].t - mean[2]};
      for (int a = 0; a < 3; ++a) var[a] += d[a] * d[a];
    }
    double inv[3];
    for (int a = 0; a < 3; ++a) {
      const double sd = std::sqrt(var[a] / n);
      inv[a] = sd > 1e-9 ? 1.0 / sd : 1.0;
    }
    for (std::size_t i = begin; i < end; ++i) {
      out(i, 0) = static_cast<Scalar>((positions[i].x - mean[0]) * inv[0]);
      out(i, 1) = static_cast<Scalar>((positions[i].y - mean[1]) * inv[1]);
      out(i, 2) = static_cast<Scalar>((positions[i].t - mean[2]) * inv[2]);
    }
  }
  return out;
}

std::vector<std::int32_t> argmax_rows(const Matrix& logits) {
  std::vector<std::int32_t> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = logits.row(i);
    out[i] = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

SegmentationResult gmnn_forward(const ModelParams& model, const EventGraph& graph) {
  if (graph.empty()) throw StructuralError("cannot segment an empty graph");
  const GraphHierarchy h = build_hierarchy(graph, model.config.hierarchy_options());
  Tape t(false);
  const Var logits = forward_hierarchy(t, model, h);
  check_finite(t.value(logits), "logits");
  SegmentationResult r;
  r.logits = restore_input_order(t.value(logits), h.canonical_order);
  r.labels = argmax_rows(r.logits);
  return r;
}

}  // namespace gmnn
