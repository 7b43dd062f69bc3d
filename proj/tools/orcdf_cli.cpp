// orcdf: train, evaluate, diagnose, sweep, cat, synth.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure,
// 1 anything else.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "orcdf/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> checkpoint;
  std::vector<std::string> students;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config");
  cmd->add_option("--seed", f.seed, "root seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--threads", f.threads, "worker threads for sweep cells");
}

nlohmann::json read_json(const std::string& path) {
  const std::string text = orcdf::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw orcdf::ConfigError(path + ": " + e.what());
  }
}

// Checkpoint run config, then the config file, then flags.
orcdf::RunConfig effective_config(const Flags& f) {
  nlohmann::json j = nlohmann::json::object();
  if (f.checkpoint) {
    j = orcdf::embedded_run_config(orcdf::load_checkpoint(*f.checkpoint));
    j.erase("checkpoint");
  }
  if (!f.config.empty()) j.merge_patch(read_json(f.config));
  orcdf::RunConfig cfg;
  cfg.merge(j);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.threads) cfg.threads = *f.threads;
  if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
  if (!f.students.empty()) cfg.students = f.students;
  cfg.validate();
  return cfg;
}

// One-line summary on stderr; MND as a percentage, like published tables.
void summarize(const orcdf::MetricReport& r) {
  std::fprintf(stderr, "AUC %.4f  ACC %.4f", r.auc, r.acc);
  if (r.doa) std::fprintf(stderr, "  DOA %.4f", *r.doa);
  if (r.mnd) std::fprintf(stderr, "  MND(%%) %.3f", 100.0 * *r.mnd);
  std::fprintf(stderr, "\n");
}

int run(const std::string& command, const Flags& f) {
  const orcdf::RunConfig cfg = effective_config(f);
  if (command == "train") {
    const auto outcome = orcdf::cmd_train(cfg);
    std::cout << outcome.report.to_json().dump(2) << '\n';
    summarize(outcome.report);
  } else if (command == "evaluate") {
    const auto report = orcdf::cmd_evaluate(cfg);
    std::cout << report.to_json().dump(2) << '\n';
    summarize(report);
  } else if (command == "diagnose") {
    const auto m = orcdf::cmd_diagnose(cfg);
    std::cout << "wrote " << m.rows() << " x " << m.cols() << " mastery rows to "
              << (std::filesystem::path(cfg.out) / "mastery.csv").string() << '\n';
  } else if (command == "sweep") {
    const auto rows = orcdf::cmd_sweep(cfg);
    std::cout << "wrote " << rows.size() << " cells to " << (std::filesystem::path(cfg.out) / "sweep.csv").string()
              << '\n';
  } else if (command == "cat") {
    const auto rows = orcdf::cmd_cat(cfg);
    orcdf::write_cat_csv(std::cout, rows);
  } else if (command == "synth") {
    const auto sd = orcdf::cmd_synth(cfg);
    std::cout << "wrote " << sd.data.logs().size() << " logs to " << cfg.out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oversmoothing-resistant cognitive diagnosis"};
  app.require_subcommand(1);
  Flags flags;

  auto* train = app.add_subcommand("train", "train a model, write checkpoint, epoch log and report");
  auto* evaluate = app.add_subcommand("evaluate", "re-score a checkpoint on its test split");
  auto* diagnose = app.add_subcommand("diagnose", "write mastery rows of a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "train over p_t / p_n / variant grids and seeds");
  auto* cat = app.add_subcommand("cat", "simulate adaptive testing on held-out students");
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
  for (auto* cmd : {train, evaluate, diagnose, sweep, cat, synth}) add_common(cmd, flags);
  for (auto* cmd : {evaluate, diagnose, cat}) cmd->add_option("--checkpoint", flags.checkpoint, "model checkpoint");
  diagnose->add_option("--students", flags.students, "student ids (default: all)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const orcdf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const orcdf::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const orcdf::UndefinedMetricError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const orcdf::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
