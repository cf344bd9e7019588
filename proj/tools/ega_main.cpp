#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ega/error.hpp"
#include "ega/harness.hpp"
#include "ega/metrics.hpp"
#include "ega/net.hpp"
#include "ega/synth.hpp"
#include "ega/textio.hpp"

namespace fs = std::filesystem;
namespace hx = ega::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> strategies;
  std::optional<double> temperature;
};

void add_common(CLI::App* cmd, Common& c, bool strategy, bool multi_strategy = false) {
  cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--out", c.out, "output directory");
  if (strategy) {
    auto* opt = cmd->add_option("--strategy", c.strategies,
                                multi_strategy ? "strategy id, repeatable" : "strategy id");
    if (!multi_strategy) opt->expected(1);
    cmd->add_option("--temperature", c.temperature, "EGA temperature T");
  }
}

hx::ExperimentConfig resolve(const Common& c) {
  hx::ExperimentConfig cfg = c.config.empty() ? hx::ExperimentConfig{} : hx::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.strategies.size() == 1) cfg.strategy = c.strategies.front();
  if (c.temperature) cfg.strategy_params.temperature = *c.temperature;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& body) {
  std::ofstream f(path);
  if (!f) throw ega::InvalidInput("cannot write " + path.string());
  body(f);
  if (!f) throw ega::InvalidInput("write failed: " + path.string());
}

// Summary to stdout; rows to <out>/metrics.csv, or after the summary when no
// directory was given.
void emit(const std::string& out, const std::vector<ega::metrics::ReportRow>& rows, const std::string& summary) {
  std::cout << summary;
  if (out.empty()) {
    std::cout << '\n';
    ega::metrics::write_rows(rows, std::cout);
    return;
  }
  const auto dir = prepare_out(out);
  ega::metrics::write_rows(rows, dir / "metrics.csv");
  write_file(dir / "summary.txt", [&](std::ostream& f) { f << summary; });
}

void write_config(const hx::ExperimentConfig& cfg, const std::string& out) {
  if (out.empty()) return;
  write_file(prepare_out(out) / "config.resolved.json", [&](std::ostream& f) { f << cfg.canonical() << '\n'; });
}

int cmd_gen(const Common& c) {
  const auto cfg = resolve(c);
  if (c.out.empty()) throw ega::InvalidConfig("gen: --out is required");
  const auto dir = prepare_out(c.out);
  const auto data = hx::build_dataset(cfg);
  write_file(dir / "manifest.csv", [&](std::ostream& m) {
    m << "index,seed,split,file,config_hash\n";
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "record_%03zu.txt", i);
      ega::synth::write_record(data.records[i], dir / name);
      m << i << ',' << data.records[i].seed << ',' << hx::split_name(data.roles[i]) << ',' << name << ','
        << ega::textio::hex64(data.records[i].config_hash) << '\n';
    }
  });
  write_config(cfg, c.out);
  std::cout << "wrote " << data.records.size() << " records (" << data.train.size() << " train, " << data.val.size()
            << " val, " << data.test.size() << " test windows) to " << dir.string() << '\n';
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = resolve(c);
  const auto data = hx::build_dataset(cfg);
  const auto run = hx::train_model(cfg, data);
  std::ostringstream summary;
  hx::print_run(run.record, summary);
  emit(c.out, run.record.rows(), summary.str());
  if (!c.out.empty()) {
    const auto dir = prepare_out(c.out);
    write_file(dir / "losses.csv", [&](std::ostream& f) { hx::write_epoch_losses(run.record, f); });
    if (run.models.size() == 1) {
      ega::net::save_checkpoint(run.models.front(), dir / "model.ckpt");
    } else {
      for (std::size_t t = 0; t < run.models.size(); ++t)
        ega::net::save_checkpoint(run.models[t], dir / ("model_" + std::string(hx::task_name(t)) + ".ckpt"));
    }
    write_config(cfg, c.out);
  }
  return 0;
}

int cmd_compare(const Common& c) {
  Common base = c;
  base.strategies.clear();
  auto cfg = resolve(base);
  const auto strategies = c.strategies.empty() ? cfg.compare : c.strategies;
  const auto cmp = hx::compare_strategies(cfg, strategies, cfg.baseline);
  std::ostringstream summary;
  hx::print_comparison(cmp, summary);
  emit(c.out, cmp.rows(), summary.str());
  write_config(cfg, c.out);
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto cfg = resolve(c);
  const auto grid = cfg.noise.empty() ? hx::standard_noise_grid() : cfg.noise;
  const auto sweep = hx::noise_sweep(cfg, grid);
  std::ostringstream summary;
  hx::print_sweep(sweep, summary);
  emit(c.out, sweep.rows(), summary.str());
  write_config(cfg, c.out);
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<ega::metrics::ReportRow> rows;
  for (const auto& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) p /= "metrics.csv";
    auto r = ega::metrics::read_rows(p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::ostringstream summary;
  hx::print_report(rows, summary);
  std::cout << summary.str();
  if (!out.empty())
    write_file(prepare_out(out) / "report.txt", [&](std::ostream& f) { f << summary.str(); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task gradient balancing experiments"};
  app.require_subcommand(1);

  Common gen, train, compare, sweep;
  auto* gen_cmd = app.add_subcommand("gen", "write the synthetic dataset records");
  add_common(gen_cmd, gen, false);
  auto* train_cmd = app.add_subcommand("train", "train one model and report test metrics");
  add_common(train_cmd, train, true);
  auto* compare_cmd = app.add_subcommand("compare", "repeated runs of several strategies against a baseline");
  add_common(compare_cmd, compare, true, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "train on clean data, evaluate under test-time noise");
  add_common(sweep_cmd, sweep, true);

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "aggregate exported metric rows");
  report_cmd->add_option("inputs", report_inputs, "metrics.csv files or directories containing one")
      ->required()
      ->check(CLI::ExistingPath);
  report_cmd->add_option("--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*train_cmd) return cmd_train(train);
    if (*compare_cmd) return cmd_compare(compare);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*report_cmd) return cmd_report(report_inputs, report_out);
  } catch (const ega::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
