#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "crules/error.hpp"
#include "crules/rng.hpp"
#include "crules/schema.hpp"
#include "crules/trace.hpp"

namespace crules {

// Flat supervised view of traces: one row per unit per step.
struct LabeledConceptSet {
  AlgorithmId algorithm = AlgorithmId::Bfs;
  int width = 0;
  int label_count = 0;
  std::vector<std::vector<char>> concepts;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

inline LabeledConceptSet collect_labeled_set(const std::vector<Trace>& traces) {
  if (traces.empty()) throw invalid_argument_error("no traces given");
  const auto schema = ConceptSchema::for_algorithm(traces.front().algorithm);
  LabeledConceptSet out;
  out.algorithm = schema.algorithm;
  out.width = schema.width();
  out.label_count = schema.label_count;
  for (const Trace& trace : traces) {
    if (trace.algorithm != schema.algorithm)
      throw invalid_argument_error("traces mix algorithms");
    for (const StepRecord& step : trace.steps)
      for (std::size_t u = 0; u < step.concepts.size(); ++u) {
        out.concepts.push_back(step.concepts[u]);
        out.labels.push_back(step.outputs[u]);
      }
  }
  return out;
}

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 32;
  int epochs = 100;
  double lambda_l1 = 0.0;
  std::optional<int> prune_epoch;  // mask computed at the start of this epoch (0-based)
  std::uint64_t seed = 0;
  int hidden = 16;
  bool linear = false;  // single layer, width = label count, no rectifier
};

// W1 rows are per-concept weight groups (shape |C| x H); the optional second
// layer W2 has shape H x L. prune_mask marks the concept rows still alive.
struct DecoderModel {
  AlgorithmId algorithm = AlgorithmId::Bfs;
  int concept_count = 0;
  int hidden = 0;
  int label_count = 0;
  bool linear = false;
  std::vector<std::vector<double>> w1;
  std::vector<double> b1;
  std::vector<std::vector<double>> w2;
  std::vector<double> b2;
  std::vector<char> prune_mask;
  TrainConfig config;
};

// Zeroes every concept row whose L1 norm falls below half the largest row
// norm (the boundary itself survives); returns the keep mask. An all-zero
// matrix keeps every row (threshold 0).
inline std::vector<char> prune_firstlayer(std::vector<std::vector<double>>& w1) {
  std::vector<double> norms(w1.size(), 0.0);
  double max_norm = 0.0;
  for (std::size_t j = 0; j < w1.size(); ++j) {
    for (double w : w1[j]) norms[j] += std::abs(w);
    max_norm = std::max(max_norm, norms[j]);
  }
  const double threshold = max_norm / 2.0;
  std::vector<char> mask(w1.size(), 1);
  for (std::size_t j = 0; j < w1.size(); ++j) {
    if (norms[j] < threshold) {
      mask[j] = 0;
      std::fill(w1[j].begin(), w1[j].end(), 0.0);
    }
  }
  return mask;
}

inline std::vector<double> concept_relevance(const DecoderModel& model) {
  std::vector<double> scores(model.w1.size(), 0.0);
  for (std::size_t j = 0; j < model.w1.size(); ++j)
    for (double w : model.w1[j]) scores[j] += std::abs(w);
  return scores;
}

inline std::vector<int> relevant_concepts(const DecoderModel& model) {
  std::vector<int> out;
  for (std::size_t j = 0; j < model.prune_mask.size(); ++j)
    if (model.prune_mask[j]) out.push_back(static_cast<int>(j));
  return out;
}

namespace decoder_detail {

inline std::vector<double> forward_logits(const DecoderModel& m, const std::vector<char>& x,
                                          std::vector<double>* hidden_pre = nullptr) {
  std::vector<double> h(static_cast<std::size_t>(m.hidden), 0.0);
  for (int k = 0; k < m.hidden; ++k) {
    double acc = m.b1[static_cast<std::size_t>(k)];
    for (int j = 0; j < m.concept_count; ++j)
      if (x[static_cast<std::size_t>(j)])
        acc += m.w1[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    h[static_cast<std::size_t>(k)] = acc;
  }
  if (hidden_pre) *hidden_pre = h;
  if (m.linear) return h;
  std::vector<double> z(static_cast<std::size_t>(m.label_count), 0.0);
  for (int l = 0; l < m.label_count; ++l) {
    double acc = m.b2[static_cast<std::size_t>(l)];
    for (int k = 0; k < m.hidden; ++k) {
      const double hk = h[static_cast<std::size_t>(k)];
      if (hk > 0.0) acc += hk * m.w2[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
    }
    z[static_cast<std::size_t>(l)] = acc;
  }
  return z;
}

inline std::vector<double> softmax(std::vector<double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

struct Gradients {
  std::vector<std::vector<double>> w1;
  std::vector<double> b1;
  std::vector<std::vector<double>> w2;
  std::vector<double> b2;
};

inline Gradients zero_like(const DecoderModel& m) {
  Gradients g;
  g.w1.assign(m.w1.size(), std::vector<double>(static_cast<std::size_t>(m.hidden), 0.0));
  g.b1.assign(m.b1.size(), 0.0);
  g.w2.assign(m.w2.size(), std::vector<double>(static_cast<std::size_t>(m.label_count), 0.0));
  g.b2.assign(m.b2.size(), 0.0);
  return g;
}

// Mean cross-entropy over the batch plus lambda * L1(W1); the L1 subgradient
// at exactly zero is taken as zero.
inline double loss_and_gradients(const DecoderModel& m, const std::vector<std::vector<char>>& xs,
                                 const std::vector<int>& ys, const std::vector<std::size_t>& batch,
                                 double lambda, Gradients& g) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const auto& x = xs[idx];
    std::vector<double> h_pre;
    const auto z = forward_logits(m, x, &h_pre);
    const auto p = softmax(z);
    const int y = ys[idx];
    loss += -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300)) * inv_b;
    std::vector<double> dz(p.size());
    for (std::size_t l = 0; l < p.size(); ++l)
      dz[l] = (p[l] - (static_cast<int>(l) == y ? 1.0 : 0.0)) * inv_b;
    if (m.linear) {
      for (std::size_t l = 0; l < dz.size(); ++l) {
        g.b1[l] += dz[l];
        if (dz[l] != 0.0)
          for (int j = 0; j < m.concept_count; ++j)
            if (x[static_cast<std::size_t>(j)]) g.w1[static_cast<std::size_t>(j)][l] += dz[l];
      }
      continue;
    }
    for (int k = 0; k < m.hidden; ++k) {
      if (h_pre[static_cast<std::size_t>(k)] <= 0.0) continue;  // rectifier gate
      double dh = 0.0;
      for (std::size_t l = 0; l < dz.size(); ++l) {
        g.w2[static_cast<std::size_t>(k)][l] += h_pre[static_cast<std::size_t>(k)] * dz[l];
        dh += m.w2[static_cast<std::size_t>(k)][l] * dz[l];
      }
      g.b1[static_cast<std::size_t>(k)] += dh;
      for (int j = 0; j < m.concept_count; ++j)
        if (x[static_cast<std::size_t>(j)])
          g.w1[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] += dh;
    }
    for (std::size_t l = 0; l < dz.size(); ++l) g.b2[l] += dz[l];
  }
  for (std::size_t j = 0; j < m.w1.size(); ++j)
    for (std::size_t k = 0; k < m.w1[j].size(); ++k) {
      const double w = m.w1[j][k];
      loss += lambda * std::abs(w);
      if (w > 0.0)
        g.w1[j][k] += lambda;
      else if (w < 0.0)
        g.w1[j][k] -= lambda;
    }
  return loss;
}

struct AdamState {
  Gradients m, v;
  long long t = 0;
};

inline void adam_update(std::vector<double>& w, std::vector<double>& m, std::vector<double>& v,
                        const std::vector<double>& g, double lr, double bc1, double bc2) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = 0.9 * m[i] + 0.1 * g[i];
    v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
    w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
  }
}

}  // namespace decoder_detail

inline std::vector<double> label_scores(const DecoderModel& model, const std::vector<char>& concepts) {
  if (static_cast<int>(concepts.size()) != model.concept_count)
    throw invalid_argument_error("concept row width does not match the model",
                                 {{"model_width", model.concept_count}, {"row_width", concepts.size()}});
  return decoder_detail::forward_logits(model, concepts);
}

inline int predict_label(const DecoderModel& model, const std::vector<char>& concepts) {
  const auto z = label_scores(model, concepts);
  int best = 0;
  for (int l = 1; l < model.label_count; ++l)
    if (z[static_cast<std::size_t>(l)] > z[static_cast<std::size_t>(best)]) best = l;
  return best;
}

struct TrainResult {
  DecoderModel model;
  std::vector<double> epoch_losses;  // mean pre-update batch objective per epoch
};

inline TrainResult train_decoder_with_history(const LabeledConceptSet& data, const TrainConfig& cfg) {
  if (data.size() == 0) throw invalid_argument_error("training data is empty");
  if (cfg.batch_size <= 0 || cfg.epochs < 0 || cfg.learning_rate <= 0.0 || cfg.lambda_l1 < 0.0)
    throw invalid_argument_error("bad training configuration");
  if (cfg.prune_epoch && (*cfg.prune_epoch < 0 || *cfg.prune_epoch >= cfg.epochs))
    throw invalid_argument_error("prune epoch must fall inside the training schedule");
  std::vector<char> seen(static_cast<std::size_t>(data.label_count), 0);
  for (int y : data.labels) {
    if (y < 0 || y >= data.label_count)
      throw invalid_argument_error("label outside the schema range", {{"label", y}});
    seen[static_cast<std::size_t>(y)] = 1;
  }
  for (int l = 0; l < data.label_count; ++l)
    if (!seen[static_cast<std::size_t>(l)])
      throw Error("missing-label", "a label of the schema never occurs in the training data",
                  {{"label", l}});

  DecoderModel m;
  m.algorithm = data.algorithm;
  m.concept_count = data.width;
  m.label_count = data.label_count;
  m.linear = cfg.linear;
  m.hidden = cfg.linear ? data.label_count : cfg.hidden;
  m.config = cfg;
  Rng rng(derive_seed(cfg.seed, 0xdec0dee1));
  const auto init_matrix = [&](std::size_t rows, std::size_t cols) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& row : w)
      for (double& v : row) v = rng.real(-a, a);
    return w;
  };
  m.w1 = init_matrix(static_cast<std::size_t>(m.concept_count), static_cast<std::size_t>(m.hidden));
  m.b1.assign(static_cast<std::size_t>(m.hidden), 0.0);
  if (!m.linear) {
    m.w2 = init_matrix(static_cast<std::size_t>(m.hidden), static_cast<std::size_t>(m.label_count));
    m.b2.assign(static_cast<std::size_t>(m.label_count), 0.0);
  }
  m.prune_mask.assign(static_cast<std::size_t>(m.concept_count), 1);

  decoder_detail::AdamState adam;
  adam.m = decoder_detail::zero_like(m);
  adam.v = decoder_detail::zero_like(m);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  bool mask_frozen = false;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.prune_epoch && epoch == *cfg.prune_epoch) {
      m.prune_mask = prune_firstlayer(m.w1);
      mask_frozen = true;
    }
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      auto grads = decoder_detail::zero_like(m);
      const double loss =
          decoder_detail::loss_and_gradients(m, data.concepts, data.labels, batch, cfg.lambda_l1, grads);
      if (!std::isfinite(loss))
        throw Error("non-finite-loss", "training objective diverged",
                    {{"epoch", epoch}, {"loss", "nan-or-inf"}});
      epoch_loss += loss;
      ++batches;
      if (mask_frozen)
        for (std::size_t j = 0; j < grads.w1.size(); ++j)
          if (!m.prune_mask[j]) std::fill(grads.w1[j].begin(), grads.w1[j].end(), 0.0);
      ++adam.t;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(adam.t));
      for (std::size_t j = 0; j < m.w1.size(); ++j)
        decoder_detail::adam_update(m.w1[j], adam.m.w1[j], adam.v.w1[j], grads.w1[j],
                                    cfg.learning_rate, bc1, bc2);
      decoder_detail::adam_update(m.b1, adam.m.b1, adam.v.b1, grads.b1, cfg.learning_rate, bc1, bc2);
      for (std::size_t k = 0; k < m.w2.size(); ++k)
        decoder_detail::adam_update(m.w2[k], adam.m.w2[k], adam.v.w2[k], grads.w2[k],
                                    cfg.learning_rate, bc1, bc2);
      decoder_detail::adam_update(m.b2, adam.m.b2, adam.v.b2, grads.b2, cfg.learning_rate, bc1, bc2);
      if (mask_frozen)
        for (std::size_t j = 0; j < m.w1.size(); ++j)
          if (!m.prune_mask[j]) std::fill(m.w1[j].begin(), m.w1[j].end(), 0.0);
    }
    result.epoch_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
  }
  result.model = std::move(m);
  return result;
}

inline DecoderModel train_decoder(const LabeledConceptSet& data, const TrainConfig& cfg) {
  return train_decoder_with_history(data, cfg).model;
}

// Independent bit flips; deterministic per seed. flip_prob must stay below
// one half so corruption never dominates the signal.
inline ConceptMatrix corrupt_concepts(const ConceptMatrix& concepts, double flip_prob,
                                      std::uint64_t seed) {
  if (flip_prob < 0.0 || flip_prob >= 0.5)
    throw invalid_argument_error("flip probability must lie in [0, 0.5)");
  ConceptMatrix out = concepts;
  if (flip_prob == 0.0) return out;
  Rng rng(derive_seed(seed, 0xf11b));
  for (auto& row : out)
    for (auto& bit : row)
      if (rng.bernoulli(flip_prob)) bit = bit ? 0 : 1;
  return out;
}

inline nlohmann::json to_json(const DecoderModel& m) {
  nlohmann::json cfg{{"learning_rate", m.config.learning_rate},
                     {"batch_size", m.config.batch_size},
                     {"epochs", m.config.epochs},
                     {"lambda_l1", m.config.lambda_l1},
                     {"prune_epoch", nullptr},
                     {"seed", m.config.seed},
                     {"hidden", m.config.hidden},
                     {"linear", m.config.linear}};
  if (m.config.prune_epoch) cfg["prune_epoch"] = *m.config.prune_epoch;
  nlohmann::json j{{"schema", to_string(m.algorithm)},
                   {"hidden", m.hidden},
                   {"W1", m.w1},
                   {"b1", m.b1},
                   {"W2", nullptr},
                   {"b2", nullptr},
                   {"prune_mask", nlohmann::json::array()},
                   {"config", std::move(cfg)}};
  if (!m.linear) {
    j["W2"] = m.w2;
    j["b2"] = m.b2;
  }
  for (char bit : m.prune_mask) j["prune_mask"].push_back(static_cast<int>(bit));
  return j;
}

inline DecoderModel model_from_json(const nlohmann::json& j) {
  DecoderModel m;
  try {
    m.algorithm = algorithm_from_string(j.at("schema").get<std::string>());
    m.hidden = j.at("hidden").get<int>();
    m.w1 = j.at("W1").get<std::vector<std::vector<double>>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.linear = j.at("W2").is_null();
    if (!m.linear) {
      m.w2 = j.at("W2").get<std::vector<std::vector<double>>>();
      m.b2 = j.at("b2").get<std::vector<double>>();
    }
    for (const auto& bit : j.at("prune_mask")) m.prune_mask.push_back(bit.get<int>() ? 1 : 0);
    const auto& cfg = j.at("config");
    m.config.learning_rate = cfg.at("learning_rate").get<double>();
    m.config.batch_size = cfg.at("batch_size").get<int>();
    m.config.epochs = cfg.at("epochs").get<int>();
    m.config.lambda_l1 = cfg.at("lambda_l1").get<double>();
    if (!cfg.at("prune_epoch").is_null()) m.config.prune_epoch = cfg.at("prune_epoch").get<int>();
    m.config.seed = cfg.at("seed").get<std::uint64_t>();
    m.config.hidden = cfg.at("hidden").get<int>();
    m.config.linear = cfg.at("linear").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-model-json", e.what());
  }
  m.concept_count = static_cast<int>(m.w1.size());
  m.label_count = m.linear ? m.hidden : static_cast<int>(m.b2.size());
  const auto schema = ConceptSchema::for_algorithm(m.algorithm);
  if (m.concept_count != schema.width() || m.label_count != schema.label_count)
    throw Error("malformed-model-json", "model shape does not match the schema");
  return m;
}

}  // namespace crules
