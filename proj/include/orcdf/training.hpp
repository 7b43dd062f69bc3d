#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "orcdf/cdm.hpp"
#include "orcdf/dataset.hpp"
#include "orcdf/error.hpp"
#include "orcdf/graph.hpp"
#include "orcdf/metrics.hpp"
#include "orcdf/numerics/optim.hpp"
#include "orcdf/numerics/rng.hpp"
#include "orcdf/numerics/tape.hpp"
#include "orcdf/rgc.hpp"

namespace orcdf {

/// Model family trained by train(). `Ol` is the base CDM on plain embedding
/// tables; the others put the graph encoder in front of it.
enum class Variant { Or, OrWithoutRgc, OrWithoutReg, Ol };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Or: return "or";
    case Variant::OrWithoutRgc: return "or-wo-rgc";
    case Variant::OrWithoutReg: return "or-wo-reg";
    case Variant::Ol: return "ol";
  }
  return "?";
}

inline Variant variant_from_string(std::string_view s) {
  if (s == "or") return Variant::Or;
  if (s == "or-wo-rgc") return Variant::OrWithoutRgc;
  if (s == "or-wo-reg") return Variant::OrWithoutReg;
  if (s == "ol") return Variant::Ol;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected or | or-wo-rgc | or-wo-reg | ol)");
}

inline std::string_view to_string(ConsistencyForm f) { return f == ConsistencyForm::Cosine ? "cosine" : "dot"; }

inline ConsistencyForm consistency_from_string(std::string_view s) {
  if (s == "cosine") return ConsistencyForm::Cosine;
  if (s == "dot") return ConsistencyForm::Dot;
  throw ConfigError("unknown consistency form '" + std::string(s) + "'");
}

struct TrainConfig {
  std::int32_t dim = 32;
  int layers = 3;
  double p_f = 0.15;
  double lambda_reg = 1e-3;
  double tau = 0.5;
  double lr = 4e-3;
  std::size_t batch_size = 4096;
  int max_epochs = 100;
  int patience = 5;  ///< 0 disables early stopping
  std::uint64_t seed = 0;
  Activation activation = Activation::Tanh;
  CdmKind cdm = CdmKind::Ncdm;
  bool flip_regularizer = true;
  ConsistencyForm consistency = ConsistencyForm::Cosine;
  Variant variant = Variant::Or;
  bool allow_out_of_range = false;  ///< skip the swept-range checks

  /// Whether the flipped-graph consistency term is part of the loss.
  bool regularized() const noexcept {
    return variant == Variant::Or && flip_regularizer && lambda_reg > 0.0;
  }

  void validate() const {
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (p_f < 0.0 || p_f > 1.0) throw ConfigError("p_f must lie in [0, 1]");
    if (lambda_reg < 0.0) throw ConfigError("lambda_reg must be >= 0");
    if (tau <= 0.0) throw ConfigError("tau must be > 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (allow_out_of_range) return;
    if (layers > 4) throw ConfigError("layers outside [1, 4]; set allow_out_of_range to override");
    if (p_f < 0.05 || p_f > 0.2) throw ConfigError("p_f outside [0.05, 0.2]; set allow_out_of_range to override");
    if (lambda_reg != 0.0 && (lambda_reg < 1e-4 || lambda_reg > 1e-1)) {
      throw ConfigError("lambda_reg outside {0} U [1e-4, 1e-1]; set allow_out_of_range to override");
    }
    if (tau < 0.1 || tau > 5.0) throw ConfigError("tau outside [0.1, 5]; set allow_out_of_range to override");
  }

  nlohmann::json to_json() const {
    return {{"dim", dim},
            {"layers", layers},
            {"p_f", p_f},
            {"lambda_reg", lambda_reg},
            {"tau", tau},
            {"lr", lr},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"seed", seed},
            {"activation", std::string(to_string(activation))},
            {"cdm", std::string(to_string(cdm))},
            {"flip_regularizer", flip_regularizer},
            {"consistency", std::string(to_string(consistency))},
            {"variant", std::string(to_string(variant))},
            {"allow_out_of_range", allow_out_of_range}};
  }

  /// Reads the keys present in `j` over the defaults. Unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.merge(j);
    return c;
  }

  void merge(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("training config must be a JSON object");
    try {
      for (const auto& [key, v] : j.items()) {
        if (key == "dim") dim = v.get<std::int32_t>();
        else if (key == "layers") layers = v.get<int>();
        else if (key == "p_f") p_f = v.get<double>();
        else if (key == "lambda_reg") lambda_reg = v.get<double>();
        else if (key == "tau") tau = v.get<double>();
        else if (key == "lr") lr = v.get<double>();
        else if (key == "batch_size") batch_size = v.get<std::size_t>();
        else if (key == "max_epochs") max_epochs = v.get<int>();
        else if (key == "patience") patience = v.get<int>();
        else if (key == "seed") seed = v.get<std::uint64_t>();
        else if (key == "activation") activation = activation_from_string(v.get<std::string>());
        else if (key == "cdm") cdm = cdm_from_string(v.get<std::string>());
        else if (key == "flip_regularizer") flip_regularizer = v.get<bool>();
        else if (key == "consistency") consistency = consistency_from_string(v.get<std::string>());
        else if (key == "variant") variant = variant_from_string(v.get<std::string>());
        else if (key == "allow_out_of_range") allow_out_of_range = v.get<bool>();
        else throw ConfigError("unknown training key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad training config value: ") + e.what());
    }
  }
};

/// Adjacency a forward pass runs on. Exactly one member is set for graph
/// variants; both are null for `Ol`.
struct GraphView {
  const SubgraphAdjacency* subgraphs = nullptr;
  const NormalizedAdjacency* undecomposed = nullptr;
};

/// Response graph of the training logs with the adjacency each variant needs.
struct TrainingGraph {
  ResponseGraph graph;
  SubgraphAdjacency subgraphs;
  NormalizedAdjacency undecomposed;
  Variant variant = Variant::Or;

  static TrainingGraph build(const Dataset& d, std::span<const Response> train, Variant variant) {
    TrainingGraph t;
    t.variant = variant;
    t.graph = ResponseGraph::build(build_interaction_matrix(d, train), d.q());
    if (variant == Variant::OrWithoutRgc) {
      t.undecomposed = normalize(t.graph.combined());
    } else if (variant != Variant::Ol) {
      t.subgraphs = SubgraphAdjacency::of(t.graph);
    }
    return t;
  }

  GraphView view() const {
    if (variant == Variant::Ol) return {};
    if (variant == Variant::OrWithoutRgc) return {nullptr, &undecomposed};
    return {&subgraphs, nullptr};
  }
};

/// All trainable state of one model: embeddings, encoder weights, and the
/// diagnosis model on top.
class Network {
 public:
  Network(const TrainConfig& cfg, const QMatrix& q, std::int32_t n_students)
      : cfg_(cfg), n_students_(n_students), n_exercises_(q.n_exercises()), n_concepts_(q.n_concepts()) {
    Rng rng(cfg.seed, "init");
    const std::int32_t nodes = n_nodes();
    std::int32_t width = cfg.dim;
    if (cfg.variant == Variant::Ol) {
      // The plain model reads its tables directly; NCDM tables are Z wide.
      if (cfg.cdm == CdmKind::Ncdm) width = n_concepts_;
      rgc_.h0 = Tensor("rgc.h0", xavier_init(nodes, width, rng));
      rgc_.layers = 0;
    } else {
      rgc_ = RgcParams::init(nodes, cfg.dim, cfg.layers, cfg.activation, rng);
      if (cfg.cdm == CdmKind::Ncdm) transform_ = TransformParams::init(nodes, cfg.dim, n_concepts_, rng);
    }
    cdm_ = make_model(cfg.cdm, q, width, rng);
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  std::int32_t n_students() const noexcept { return n_students_; }
  std::int32_t n_exercises() const noexcept { return n_exercises_; }
  std::int32_t n_concepts() const noexcept { return n_concepts_; }
  std::int32_t n_nodes() const noexcept { return n_students_ + n_exercises_ + n_concepts_; }
  bool uses_transform() const noexcept { return cfg_.variant != Variant::Ol && cfg_.cdm == CdmKind::Ncdm; }

  DiagnosisModel& cdm() noexcept { return *cdm_; }
  const DiagnosisModel& cdm() const noexcept { return *cdm_; }
  RgcParams& rgc() noexcept { return rgc_; }
  const RgcParams& rgc() const noexcept { return rgc_; }
  TransformParams& transform_params() noexcept { return transform_; }
  const TransformParams& transform_params() const noexcept { return transform_; }

  /// Pooled node embeddings for one graph.
  PooledEmbedding embed(Tape& tape, const GraphView& g) {
    switch (cfg_.variant) {
      case Variant::Ol: {
        const Var h = tape.leaf(rgc_.h0);
        return {h, {h}};
      }
      case Variant::OrWithoutRgc:
        if (g.undecomposed == nullptr) throw ContractError("embed: undecomposed adjacency required");
        return propagate_undecomposed(tape.leaf(rgc_.h0), tape.leaf(rgc_.w_rc), rgc_.layers, rgc_.activation,
                                      *g.undecomposed);
      default:
        if (g.subgraphs == nullptr) throw ContractError("embed: subgraph adjacency required");
        return propagate(tape, rgc_, *g.subgraphs);
    }
  }

  CdmInput inputs(Tape& tape, Var h) {
    CdmInput in;
    in.latent = h;
    in.n_students = n_students_;
    in.n_exercises = n_exercises_;
    if (cfg_.cdm == CdmKind::Ncdm) in.concept_emb = uses_transform() ? transform(tape, h, transform_) : h;
    return in;
  }

  ParameterList parameters() {
    ParameterList p{&rgc_.h0};
    if (cfg_.variant != Variant::Ol) p.push_back(&rgc_.w_rc);
    if (cfg_.variant == Variant::Or || cfg_.variant == Variant::OrWithoutReg) p.push_back(&rgc_.w_wc);
    if (uses_transform()) {
      p.push_back(&transform_.w_t);
      p.push_back(&transform_.b_t);
    }
    for (Tensor* t : cdm_->parameters()) p.push_back(t);
    return p;
  }

  std::vector<Matrix> values() {
    std::vector<Matrix> out;
    for (Tensor* t : parameters()) out.push_back(t->value);
    return out;
  }

  void restore(const std::vector<Matrix>& v) {
    auto p = parameters();
    if (v.size() != p.size()) throw ContractError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i]->value = v[i];
  }

  /// Gradient-free forward: (pooled H, concept-space H_t or empty).
  std::pair<Matrix, Matrix> snapshot(const GraphView& g) {
    Tape tape(Tape::Options{false, true});
    const PooledEmbedding pooled = embed(tape, g);
    const CdmInput in = inputs(tape, pooled.h);
    return {pooled.h.value(), in.concept_emb.valid() ? in.concept_emb.value() : Matrix()};
  }

 private:
  TrainConfig cfg_;
  std::int32_t n_students_;
  std::int32_t n_exercises_;
  std::int32_t n_concepts_;
  RgcParams rgc_;
  TransformParams transform_;
  std::unique_ptr<DiagnosisModel> cdm_;
};

/// Loss of one mini-batch and its parts.
struct BatchLoss {
  Var total;
  double bce = 0.0;
  double reg = 0.0;  ///< unscaled consistency loss, 0 when absent
  std::size_t skipped_rows = 0;
};

/// L = BCE(batch) + lambda_reg * (|batch| / |train|) * L_reg(H, H').
/// `flipped` null leaves out the consistency term.
inline BatchLoss batch_loss(Tape& tape, Network& net, const GraphView& original, const GraphView* flipped,
                            std::span<const Response> batch, std::size_t train_size) {
  const auto& cfg = net.config();
  const PooledEmbedding h = net.embed(tape, original);
  const CdmInput in = net.inputs(tape, h.h);
  const Var pred = net.cdm().predict(tape, in, batch);
  std::vector<double> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].score;
  BatchLoss out;
  out.total = bce_sum(pred, labels);
  out.bce = out.total.scalar();
  if (flipped != nullptr) {
    const PooledEmbedding hf = net.embed(tape, *flipped);
    const ConsistencyLoss reg = consistency_loss(h.h, hf.h, net.n_students(), cfg.tau, cfg.consistency);
    out.reg = reg.loss.scalar();
    out.skipped_rows = reg.skipped_rows;
    const double fraction = static_cast<double>(batch.size()) / static_cast<double>(train_size);
    out.total = add(out.total, scale(reg.loss, cfg.lambda_reg * fraction));
  }
  return out;
}

/// Multiply-adds spent in sparse propagation by one training forward pass
/// (original graph, plus the flipped graph when regularized).
inline std::uint64_t forward_multiply_adds(Network& net, const GraphView& original, const GraphView* flipped) {
  Tape tape(Tape::Options{false, true});
  net.embed(tape, original);
  if (flipped != nullptr) net.embed(tape, *flipped);
  return tape.spmm_multiply_adds();
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  ///< total loss per training log
  double valid_auc = std::numeric_limits<double>::quiet_NaN();
  double valid_acc = std::numeric_limits<double>::quiet_NaN();
};

inline void write_epoch_header(std::ostream& out) { out << "epoch,train_loss,valid_auc,valid_acc\n"; }

inline void write_epoch_row(std::ostream& out, const EpochRecord& r) {
  const auto old = out.precision(17);
  out << r.epoch << ',' << r.train_loss << ',' << r.valid_auc << ',' << r.valid_acc << '\n';
  out.precision(old);
}

/// Chunked gradient-free prediction from fixed embeddings.
inline Vector predict_with(DiagnosisModel& cdm, const Matrix& latent, const Matrix& concept_emb,
                           std::int32_t n_students, std::int32_t n_exercises, std::span<const Response> logs,
                           std::size_t chunk = 4096) {
  Vector out(static_cast<Eigen::Index>(logs.size()));
  for (std::size_t b = 0; b < logs.size(); b += chunk) {
    const auto part = logs.subspan(b, std::min(chunk, logs.size() - b));
    Tape tape(Tape::Options{false, true});
    CdmInput in;
    in.latent = tape.constant(latent);
    if (concept_emb.size() != 0) in.concept_emb = tape.constant(concept_emb);
    in.n_students = n_students;
    in.n_exercises = n_exercises;
    const Var p = cdm.predict(tape, in, part);
    out.segment(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(part.size())) = p.value().col(0);
  }
  return out;
}

inline std::vector<double> labels_of(std::span<const Response> logs) {
  std::vector<double> y(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) y[i] = logs[i].score;
  return y;
}

/// Result of train(): best-epoch parameters plus the embeddings they produce on
/// the training graph.
struct TrainedModel {
  TrainConfig config;
  QMatrix q;
  std::unique_ptr<Network> net;
  Matrix latent;       ///< pooled H, nodes x width
  Matrix concept_emb;  ///< H_t, nodes x Z; empty for latent-factor models
  int best_epoch = 0;
  double best_valid_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<EpochRecord> history;

  std::int32_t n_students() const { return net->n_students(); }
  std::int32_t n_exercises() const { return net->n_exercises(); }

  Vector predict(std::span<const Response> logs) const {
    return predict_with(net->cdm(), latent, concept_emb, n_students(), n_exercises(), logs);
  }

  Mastery mastery() const { return net->cdm().mastery(latent, concept_emb, n_students()); }

  /// AUC/ACC on `test`; MND and DOA (top-10 concepts of `doa_logs`) for
  /// concept-indexed models.
  MetricReport evaluate(std::span<const Response> test, std::span<const Response> doa_logs) const {
    MetricReport rep;
    const Vector p = predict(test);
    const auto y = labels_of(test);
    const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
    rep.auc = auc(ps, y);
    rep.acc = accuracy(ps, y);
    rep.n_test = test.size();
    rep.seed = config.seed;
    rep.config = config.to_json();
    const Mastery m = mastery();
    if (m.concept_indexed) {
      rep.mnd = mnd(m);
      if (!doa_logs.empty()) rep.doa = doa(m, doa_logs, q, top_concepts(doa_logs, q, 10)).value;
    }
    return rep;
  }
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Joint training with per-epoch flip resampling and early stopping on valid AUC.
inline TrainedModel train(const Dataset& d, const Split& split, const TrainConfig& cfg,
                          const EpochObserver& observer = {}) {
  cfg.validate();
  if (split.train.empty()) throw DataError("train split is empty");
  const bool early_stop = cfg.patience > 0;
  if (early_stop && split.valid.empty()) throw ConfigError("valid split is empty while early stopping is enabled");

  const TrainingGraph tg = TrainingGraph::build(d, split.train, cfg.variant);
  const GraphView original = tg.view();

  TrainedModel out;
  out.config = cfg;
  out.q = d.q();
  out.net = std::make_unique<Network>(cfg, d.q(), d.n_students());
  Network& net = *out.net;
  Adam adam(net.parameters(), Adam::Options{cfg.lr});

  const auto valid_y = labels_of(split.valid);
  std::vector<std::size_t> order(split.train.size());
  std::vector<Response> batch;
  std::vector<Matrix> best_values = net.values();
  double best_auc = -std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    SubgraphAdjacency flipped_adj;
    GraphView flipped_view;
    const GraphView* flipped = nullptr;
    if (cfg.regularized()) {
      const auto flipped_graph = flip(tg.graph, cfg.p_f, derive_seed(cfg.seed, "flip", static_cast<std::uint64_t>(epoch)));
      flipped_adj = SubgraphAdjacency::of(flipped_graph.first);
      flipped_view = {&flipped_adj, nullptr};
      flipped = &flipped_view;
    }

    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(cfg.seed, "batch-shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++batch_index) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      batch.clear();
      for (std::size_t i = b; i < e; ++i) batch.push_back(split.train[order[i]]);
      Tape tape;
      const BatchLoss loss = batch_loss(tape, net, original, flipped, batch, split.train.size());
      const double value = loss.total.scalar();
      if (!std::isfinite(value)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": loss=" + std::to_string(value) +
                             " (bce=" + std::to_string(loss.bce) + ", reg=" + std::to_string(loss.reg) + ")");
      }
      tape.backward(loss.total);
      adam.step();
      net.cdm().project();
      epoch_loss += value;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(split.train.size());
    if (!split.valid.empty()) {
      const auto [latent, concept_emb] = net.snapshot(original);
      const Vector p = predict_with(net.cdm(), latent, concept_emb, net.n_students(), net.n_exercises(), split.valid);
      const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
      rec.valid_auc = auc(ps, valid_y);
      rec.valid_acc = accuracy(ps, valid_y);
    }
    out.history.push_back(rec);
    if (observer) observer(rec);

    if (!early_stop) {
      out.best_epoch = epoch;
      out.best_valid_auc = rec.valid_auc;
      continue;
    }
    if (rec.valid_auc > best_auc) {
      best_auc = rec.valid_auc;
      best_values = net.values();
      out.best_epoch = epoch;
      out.best_valid_auc = rec.valid_auc;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (early_stop) net.restore(best_values);
  std::tie(out.latent, out.concept_emb) = net.snapshot(original);
  return out;
}

}  // namespace orcdf
