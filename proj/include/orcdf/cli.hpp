#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "orcdf/cat.hpp"
#include "orcdf/checkpoint.hpp"
#include "orcdf/dataset.hpp"
#include "orcdf/error.hpp"
#include "orcdf/io.hpp"
#include "orcdf/metrics.hpp"
#include "orcdf/training.hpp"

namespace orcdf {

// ---------------------------------------------------------------------------
// Run configuration.

struct SyntheticConfig {
  std::int32_t n_students = 0;
  std::int32_t n_exercises = 0;
  std::int32_t n_concepts = 0;
  double density = 1.0;
  std::int32_t logs_per_student = 0;
  double slope = 4.0;
  std::string generator = "random";  ///< random | factor
  double loading = 1.0;              ///< factor generator only
  std::optional<std::uint64_t> seed;  ///< defaults to the root seed

  SyntheticSpec to_spec(std::uint64_t root_seed) const {
    const std::uint64_t s = seed.value_or(root_seed);
    SyntheticSpec spec = generator == "factor"
                             ? SyntheticSpec::factor(n_students, n_exercises, n_concepts, density, logs_per_student, s, loading)
                             : SyntheticSpec::random(n_students, n_exercises, n_concepts, density, logs_per_student, s);
    spec.slope = slope;
    return spec;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"n_students", n_students}, {"n_exercises", n_exercises}, {"n_concepts", n_concepts},
                     {"density", density},       {"logs_per_student", logs_per_student},
                     {"slope", slope},           {"generator", generator},
                     {"loading", loading}};
    if (seed) j["seed"] = *seed;
    return j;
  }
};

struct SweepGrid {
  std::vector<double> p_t;
  std::vector<double> p_n;
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
};

struct CatConfig {
  std::vector<std::size_t> steps{5, 10, 15};
  double candidate_share = 0.8;
  std::string strategy = "random";
};

/// Everything a command needs. Parsed and validated before any compute.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "out";
  std::optional<std::string> logs_path;
  std::optional<std::string> q_path;
  std::optional<SyntheticConfig> synthetic;
  SplitRatios split;
  std::string protocol = "logs";  ///< logs: per-student log split; students: 7:2:1 student split (for cat)
  double noise = 0.0;
  TrainConfig train;
  std::optional<std::string> checkpoint;
  std::vector<std::string> students;
  SweepGrid sweep;
  CatConfig cat;

  bool has_data() const { return synthetic.has_value() || (logs_path && q_path); }

  /// The training config with the root seed applied.
  TrainConfig effective_train() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
  }

  void validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (synthetic && (logs_path || q_path)) throw ConfigError("data: give either files or synthetic, not both");
    if (logs_path.has_value() != q_path.has_value()) throw ConfigError("data: logs and q must be given together");
    if (synthetic) {
      if (synthetic->generator != "random" && synthetic->generator != "factor") {
        throw ConfigError("synthetic.generator must be 'random' or 'factor'");
      }
      if (!(synthetic->slope > 0.0)) throw ConfigError("synthetic.slope must be > 0");
      synthetic->to_spec(seed).validate();
    }
    split.validate();
    if (protocol != "logs" && protocol != "students") throw ConfigError("protocol must be 'logs' or 'students'");
    if (noise < 0.0 || noise > 1.0) throw ConfigError("noise must lie in [0, 1]");
    effective_train().validate();
    for (double p : sweep.p_t) {
      if (!(p > 0.0) || p + split.valid >= 1.0) throw ConfigError("sweep.p_t values must lie in (0, 1 - split.valid)");
    }
    for (double p : sweep.p_n) {
      if (p < 0.0 || p > 1.0) throw ConfigError("sweep.p_n values must lie in [0, 1]");
    }
    if (cat.steps.empty()) throw ConfigError("cat.steps must not be empty");
    if (cat.candidate_share <= 0.0 || cat.candidate_share >= 1.0) throw ConfigError("cat.candidate_share must lie in (0, 1)");
    if (cat.strategy != "random") throw ConfigError("cat.strategy must be 'random'");
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.merge(j);
    c.validate();
    return c;
  }

  void merge(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
      for (const auto& [key, v] : j.items()) {
        if (key == "seed") seed = v.get<std::uint64_t>();
        else if (key == "threads") threads = v.get<int>();
        else if (key == "out") out = v.get<std::string>();
        else if (key == "data") merge_data(v);
        else if (key == "split") merge_split(v);
        else if (key == "protocol") protocol = v.get<std::string>();
        else if (key == "noise") noise = v.get<double>();
        else if (key == "train") train.merge(v);
        else if (key == "checkpoint") checkpoint = v.get<std::string>();
        else if (key == "students") students = v.get<std::vector<std::string>>();
        else if (key == "sweep") merge_sweep(v);
        else if (key == "cat") merge_cat(v);
        else throw ConfigError("unknown config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad config value: ") + e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out"] = out;
    nlohmann::json data = nlohmann::json::object();
    if (logs_path) data["logs"] = *logs_path;
    if (q_path) data["q"] = *q_path;
    if (synthetic) data["synthetic"] = synthetic->to_json();
    j["data"] = data;
    j["split"] = {{"train", split.train}, {"valid", split.valid}, {"test", split.test}};
    j["protocol"] = protocol;
    j["noise"] = noise;
    j["train"] = effective_train().to_json();
    if (checkpoint) j["checkpoint"] = *checkpoint;
    if (!students.empty()) j["students"] = students;
    nlohmann::json variants = nlohmann::json::array();
    for (auto v : sweep.variants) variants.push_back(std::string(to_string(v)));
    j["sweep"] = {{"p_t", sweep.p_t}, {"p_n", sweep.p_n}, {"variants", variants}, {"seeds", sweep.seeds}};
    j["cat"] = {{"steps", cat.steps}, {"candidate_share", cat.candidate_share}, {"strategy", cat.strategy}};
    return j;
  }

 private:
  static void expect_object(const nlohmann::json& v, const std::string& what) {
    if (!v.is_object()) throw ConfigError(what + " must be a JSON object");
  }

  void merge_data(const nlohmann::json& v) {
    expect_object(v, "data");
    for (const auto& [key, x] : v.items()) {
      if (key == "logs") logs_path = x.get<std::string>();
      else if (key == "q") q_path = x.get<std::string>();
      else if (key == "synthetic") merge_synthetic(x);
      else throw ConfigError("unknown data key '" + key + "'");
    }
  }

  void merge_synthetic(const nlohmann::json& v) {
    expect_object(v, "data.synthetic");
    SyntheticConfig s = synthetic.value_or(SyntheticConfig{});
    for (const auto& [key, x] : v.items()) {
      if (key == "n_students") s.n_students = x.get<std::int32_t>();
      else if (key == "n_exercises") s.n_exercises = x.get<std::int32_t>();
      else if (key == "n_concepts") s.n_concepts = x.get<std::int32_t>();
      else if (key == "density") s.density = x.get<double>();
      else if (key == "logs_per_student") s.logs_per_student = x.get<std::int32_t>();
      else if (key == "slope") s.slope = x.get<double>();
      else if (key == "generator") s.generator = x.get<std::string>();
      else if (key == "loading") s.loading = x.get<double>();
      else if (key == "seed") s.seed = x.get<std::uint64_t>();
      else throw ConfigError("unknown data.synthetic key '" + key + "'");
    }
    synthetic = s;
  }

  void merge_split(const nlohmann::json& v) {
    expect_object(v, "split");
    for (const auto& [key, x] : v.items()) {
      if (key == "train") split.train = x.get<double>();
      else if (key == "valid") split.valid = x.get<double>();
      else if (key == "test") split.test = x.get<double>();
      else throw ConfigError("unknown split key '" + key + "'");
    }
  }

  void merge_sweep(const nlohmann::json& v) {
    expect_object(v, "sweep");
    for (const auto& [key, x] : v.items()) {
      if (key == "p_t") sweep.p_t = x.get<std::vector<double>>();
      else if (key == "p_n") sweep.p_n = x.get<std::vector<double>>();
      else if (key == "seeds") sweep.seeds = x.get<std::vector<std::uint64_t>>();
      else if (key == "variants") {
        sweep.variants.clear();
        for (const auto& s : x) sweep.variants.push_back(variant_from_string(s.get<std::string>()));
      } else {
        throw ConfigError("unknown sweep key '" + key + "'");
      }
    }
  }

  void merge_cat(const nlohmann::json& v) {
    expect_object(v, "cat");
    for (const auto& [key, x] : v.items()) {
      if (key == "steps") cat.steps = x.get<std::vector<std::size_t>>();
      else if (key == "candidate_share") cat.candidate_share = x.get<double>();
      else if (key == "strategy") cat.strategy = x.get<std::string>();
      else throw ConfigError("unknown cat key '" + key + "'");
    }
  }
};

// ---------------------------------------------------------------------------
// Shared plumbing.

struct RunData {
  Dataset data;
  std::optional<SyntheticSpec> truth;
};

inline RunData load_run_data(const RunConfig& cfg) {
  if (!cfg.has_data()) throw ConfigError("config has no data section");
  RunData out;
  if (cfg.synthetic) {
    SyntheticSpec spec = cfg.synthetic->to_spec(cfg.seed);
    out.data = generate_synthetic(spec).data;
    out.truth = std::move(spec);
  } else {
    out.data = load_dataset(*cfg.logs_path, *cfg.q_path);
  }
  return out;
}

/// Logs a run is trained and scored on, per protocol.
struct RunSplit {
  Split logs;               ///< train/valid/test used by the model
  StudentSplit students;    ///< filled for the students protocol
  std::vector<Response> report_logs;  ///< logs the final AUC/ACC are computed on
};

inline const SplitRatios kStudentRatios{0.7, 0.2, 0.1};
inline const SplitRatios kStudentLogRatios{0.9, 0.1, 0.0};

inline RunSplit make_split(const RunConfig& cfg, const Dataset& d, SplitRatios ratios, double noise) {
  RunSplit out;
  if (cfg.protocol == "students") {
    out.students = split_students(d, kStudentRatios, cfg.seed);
    const Dataset sub = Dataset::create(d.n_students(), d.n_exercises(), d.n_concepts(),
                                        logs_of(d.logs(), out.students.train), d.q(), d.ids());
    out.logs = split(sub, kStudentLogRatios, cfg.seed);
    out.report_logs = out.logs.valid;
  } else {
    out.logs = split(d, ratios, cfg.seed);
    out.report_logs = out.logs.test;
  }
  out.logs = inject_noise(out.logs, noise, cfg.seed);
  return out;
}

inline std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

inline std::string optional_number(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { atomic_write(path, j.dump(2) + "\n"); }

inline void write_id_sidecar(const std::filesystem::path& dir, const Dataset& d) {
  write_json(dir / "ids.json", d.ids().to_json());
}

inline TrainedModel load_model(const std::filesystem::path& path, Checkpoint* raw = nullptr) {
  Checkpoint c = load_checkpoint(path);
  TrainedModel m = from_checkpoint(c);
  if (raw) *raw = std::move(c);
  return m;
}

/// The run config stored in a checkpoint.
inline nlohmann::json embedded_run_config(const Checkpoint& c) {
  const auto it = c.config.find("run");
  return it == c.config.end() ? nlohmann::json::object() : *it;
}

inline void check_model_matches(const TrainedModel& m, const Dataset& d) {
  if (m.n_students() != d.n_students() || m.n_exercises() != d.n_exercises() || m.q.n_concepts() != d.n_concepts()) {
    throw DataError("checkpoint shape does not match the dataset");
  }
  for (std::int32_t e = 0; e < d.n_exercises(); ++e) {
    const auto a = m.q.concepts(e);
    const auto b = d.q().concepts(e);
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) throw DataError("checkpoint Q-matrix does not match the dataset");
  }
}

inline MetricReport score(const TrainedModel& model, const RunConfig& cfg, const RunSplit& s, const Dataset& d) {
  MetricReport rep = model.evaluate(s.report_logs, d.logs());
  rep.p_t = cfg.protocol == "students" ? 0.0 : s.logs.ratios.test;
  rep.p_n = cfg.noise;
  rep.seed = cfg.seed;
  rep.config = cfg.to_json();
  return rep;
}

// ---------------------------------------------------------------------------
// Commands.

struct TrainOutcome {
  TrainedModel model;
  MetricReport report;
};

/// Trains one model and writes model.orcd, epochs.csv, report.json, ids.json
/// and config.json under cfg.out.
inline TrainOutcome cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const std::filesystem::path dir(cfg.out);
  const RunData rd = load_run_data(cfg);
  const RunSplit s = make_split(cfg, rd.data, cfg.split, cfg.noise);

  std::ostringstream epochs;
  epochs << std::setprecision(17);
  write_epoch_header(epochs);
  TrainOutcome out;
  out.model = train(rd.data, s.logs, cfg.effective_train(), [&](const EpochRecord& r) { write_epoch_row(epochs, r); });
  out.report = score(out.model, cfg, s, rd.data);

  Checkpoint c = to_checkpoint(out.model, cfg.to_json());
  c.config["ids"] = {{"student", rd.data.ids().students}, {"concept", rd.data.ids().concepts}};
  save_checkpoint(dir / "model.orcd", c);
  atomic_write(dir / "epochs.csv", epochs.str());
  write_json(dir / "report.json", out.report.to_json());
  write_id_sidecar(dir, rd.data);
  write_json(dir / "config.json", cfg.to_json());
  return out;
}

/// Re-scores a checkpoint on the split its run config describes.
inline MetricReport cmd_evaluate(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.checkpoint) throw ConfigError("evaluate needs a checkpoint");
  const TrainedModel model = load_model(*cfg.checkpoint);
  const RunData rd = load_run_data(cfg);
  check_model_matches(model, rd.data);
  const RunSplit s = make_split(cfg, rd.data, cfg.split, cfg.noise);
  MetricReport rep = score(model, cfg, s, rd.data);
  write_json(std::filesystem::path(cfg.out) / "evaluation.json", rep.to_json());
  return rep;
}

/// Mastery rows of the listed students (all students when the list is empty),
/// written to mastery.csv as student_id followed by one column per concept.
inline Matrix cmd_diagnose(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.checkpoint) throw ConfigError("diagnose needs a checkpoint");
  Checkpoint raw;
  const TrainedModel model = load_model(*cfg.checkpoint, &raw);
  const Mastery m = model.mastery();
  if (!m.concept_indexed) throw ConfigError("diagnose needs a concept-indexed model (cdm = ncdm)");

  std::vector<std::string> student_ids, concept_ids;
  try {
    student_ids = raw.config.at("ids").at("student").get<std::vector<std::string>>();
    concept_ids = raw.config.at("ids").at("concept").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    student_ids = IdMaps::identity(model.n_students());
    concept_ids = IdMaps::identity(model.q.n_concepts());
  }
  if (static_cast<std::int32_t>(student_ids.size()) != model.n_students() ||
      static_cast<Eigen::Index>(concept_ids.size()) != m.values.cols()) {
    throw DataError("checkpoint id lists do not match its tensors");
  }
  std::vector<std::int32_t> rows;
  if (cfg.students.empty()) {
    for (std::int32_t s = 0; s < model.n_students(); ++s) rows.push_back(s);
  } else {
    const auto index = detail::index_of(student_ids);
    for (const auto& id : cfg.students) {
      const auto it = index.find(id);
      if (it == index.end()) throw DataError("unknown student id '" + id + "'");
      rows.push_back(it->second);
    }
  }

  Matrix out(static_cast<Eigen::Index>(rows.size()), m.values.cols());
  std::ostringstream csv;
  csv << std::setprecision(17) << "student_id";
  for (const auto& c : concept_ids) csv << ',' << c;
  csv << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.values.row(rows[i]);
    csv << student_ids[static_cast<std::size_t>(rows[i])];
    for (Eigen::Index k = 0; k < m.values.cols(); ++k) csv << ',' << m.values(rows[i], k);
    csv << '\n';
  }
  const std::filesystem::path dir(cfg.out);
  atomic_write(dir / "mastery.csv", csv.str());
  write_json(dir / "config.json", cfg.to_json());
  return out;
}

struct SweepRow {
  std::string axis;  ///< p_t | p_n | variant
  std::string value;
  Variant variant = Variant::Or;
  std::uint64_t seed = 0;
  MetricReport report;
  int best_epoch = 0;
};

inline void write_sweep_header(std::ostream& out) { out << "axis,value,variant,seed,auc,acc,doa,mnd,best_epoch\n"; }

inline void write_sweep_row(std::ostream& out, const SweepRow& r) {
  out << r.axis << ',' << r.value << ',' << to_string(r.variant) << ',' << r.seed << ',' << csv_number(r.report.auc)
      << ',' << csv_number(r.report.acc) << ',' << optional_number(r.report.doa) << ','
      << optional_number(r.report.mnd) << ',' << r.best_epoch << '\n';
}

/// Trains one model per (grid point, seed). Grid points are every p_t value
/// (base noise), every p_n value (base split) and every variant (base split
/// and noise). Cells run on cfg.threads workers; each writes
/// cells/cell_<i>.csv and the cells are merged into sweep.csv in grid order.
inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.protocol != "logs") throw ConfigError("sweep supports protocol 'logs' only");
  struct Cell {
    std::string axis;
    std::string value;
    SplitRatios ratios;
    double noise;
    Variant variant;
    std::uint64_t seed;
  };
  const std::vector<std::uint64_t> seeds = cfg.sweep.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.sweep.seeds;
  std::vector<Cell> cells;
  for (double p : cfg.sweep.p_t) {
    const SplitRatios r{1.0 - p - cfg.split.valid, cfg.split.valid, p};
    for (auto s : seeds) cells.push_back({"p_t", csv_number(p), r, cfg.noise, cfg.train.variant, s});
  }
  for (double p : cfg.sweep.p_n) {
    for (auto s : seeds) cells.push_back({"p_n", csv_number(p), cfg.split, p, cfg.train.variant, s});
  }
  for (auto v : cfg.sweep.variants) {
    for (auto s : seeds) cells.push_back({"variant", std::string(to_string(v)), cfg.split, cfg.noise, v, s});
  }
  if (cells.empty()) throw ConfigError("sweep grid is empty");

  const RunData rd = load_run_data(cfg);
  const std::filesystem::path dir(cfg.out);
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        const Cell& c = cells[i];
        RunConfig cell_cfg = cfg;
        cell_cfg.seed = c.seed;
        cell_cfg.noise = c.noise;
        cell_cfg.split = c.ratios;
        cell_cfg.train.variant = c.variant;
        const RunSplit s = make_split(cell_cfg, rd.data, c.ratios, c.noise);
        const TrainedModel model = train(rd.data, s.logs, cell_cfg.effective_train());
        SweepRow row{c.axis, c.value, c.variant, c.seed, score(model, cell_cfg, s, rd.data), model.best_epoch};
        std::ostringstream one;
        write_sweep_header(one);
        write_sweep_row(one, row);
        std::ostringstream name;
        name << "cell_" << std::setw(5) << std::setfill('0') << i << ".csv";
        atomic_write(dir / "cells" / name.str(), one.str());
        rows[i] = std::move(row);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream merged;
  write_sweep_header(merged);
  for (const auto& r : rows) write_sweep_row(merged, r);
  atomic_write(dir / "sweep.csv", merged.str());
  write_json(dir / "config.json", cfg.to_json());
  return rows;
}

/// Adaptive-testing simulation on the held-out students of a model trained
/// with the students protocol. Writes cat.csv.
inline std::vector<CatStepReport> cmd_cat(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.checkpoint) throw ConfigError("cat needs a checkpoint");
  if (cfg.protocol != "students") throw ConfigError("cat needs a model trained with protocol 'students'");
  const TrainedModel model = load_model(*cfg.checkpoint);
  const RunData rd = load_run_data(cfg);
  check_model_matches(model, rd.data);
  const RunSplit s = make_split(cfg, rd.data, cfg.split, cfg.noise);
  const TrainingGraph graph = TrainingGraph::build(rd.data, s.logs.train, model.config.variant);
  const StudentEncoder encoder(model, graph);
  RandomStrategy strategy(cfg.seed);
  CatOptions opts;
  opts.steps = cfg.cat.steps;
  opts.candidate_share = cfg.cat.candidate_share;
  opts.seed = cfg.seed;
  const auto rows = run_cat(encoder, rd.data.logs(), s.students.test, strategy, opts);
  std::ostringstream csv;
  write_cat_csv(csv, rows);
  const std::filesystem::path dir(cfg.out);
  atomic_write(dir / "cat.csv", csv.str());
  write_json(dir / "config.json", cfg.to_json());
  return rows;
}

inline std::string matrix_csv(const Matrix& m, const std::string& id_header, const std::vector<std::string>& row_ids,
                              const std::vector<std::string>& col_ids) {
  std::ostringstream out;
  out << std::setprecision(17) << id_header;
  for (const auto& c : col_ids) out << ',' << c;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << row_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < m.cols(); ++k) out << ',' << m(i, k);
    out << '\n';
  }
  return out.str();
}

/// Generates a synthetic dataset and writes logs.csv, q.csv, the ground truth
/// (truth_mastery.csv, truth_difficulty.csv, truth_discrimination.csv),
/// ids.json and config.json.
inline SyntheticDataset cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  if (!cfg.synthetic) throw ConfigError("synth needs data.synthetic");
  const SyntheticDataset sd = generate_synthetic(cfg.synthetic->to_spec(cfg.seed));
  const Dataset& d = sd.data;
  const std::filesystem::path dir(cfg.out);
  std::ostringstream logs, q;
  write_logs_csv(logs, d, d.logs());
  write_q_csv(q, d);
  atomic_write(dir / "logs.csv", logs.str());
  atomic_write(dir / "q.csv", q.str());
  atomic_write(dir / "truth_mastery.csv", matrix_csv(sd.mastery, "student_id", d.ids().students, d.ids().concepts));
  atomic_write(dir / "truth_difficulty.csv", matrix_csv(sd.difficulty, "exercise_id", d.ids().exercises, d.ids().concepts));
  atomic_write(dir / "truth_discrimination.csv",
               matrix_csv(Matrix(sd.discrimination), "exercise_id", d.ids().exercises, {"discrimination"}));
  write_id_sidecar(dir, d);
  write_json(dir / "config.json", cfg.to_json());
  return sd;
}

}  // namespace orcdf
