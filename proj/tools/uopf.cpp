// Command-line entry point: case, gendata, train, eval, track.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uopf/config.hpp"
#include "uopf/error.hpp"
#include "uopf/pipeline.hpp"

namespace {

using namespace uopf;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> epochs;
  std::string output_dir;
};

RunConfig load_with(const std::string& path, const Overrides& o) {
  RunConfig cfg = load_run_config(path);
  if (o.seed) {
    cfg.sampling.seed = *o.seed;
    if (cfg.tracking) cfg.tracking->seed = *o.seed;
  }
  if (o.samples) cfg.sampling.samples_per_network = *o.samples;
  if (o.epochs) {
    cfg.train.epochs = *o.epochs;
    cfg.train.validate();
  }
  if (!o.output_dir.empty()) cfg.output_dir = std::filesystem::absolute(o.output_dir).lexically_normal().string();
  return cfg;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified elastic neural surrogate for AC optimal power flow"};
  app.require_subcommand(1);

  std::string config_path;
  std::string case_path;
  std::string out_path;
  int target = 0;
  Overrides over;
  PipelineOptions opts;
  opts.log = &std::cout;
  bool no_provenance = false;

  auto* case_cmd = app.add_subcommand("case", "Inspect or derive MATPOWER cases");
  case_cmd->require_subcommand(1);
  auto* validate_cmd = case_cmd->add_subcommand("validate", "Parse a case and print its size");
  validate_cmd->add_option("file", case_path, "MATPOWER case file")->required();
  auto* dump_cmd = case_cmd->add_subcommand("dump", "Print a case as JSON");
  dump_cmd->add_option("file", case_path, "MATPOWER case file")->required();
  auto* derive_cmd = case_cmd->add_subcommand("derive", "Cut a smaller connected feeder out of a case");
  derive_cmd->add_option("file", case_path, "MATPOWER case file")->required();
  derive_cmd->add_option("--target", target, "Bus count of the result")->required()->check(CLI::PositiveNumber);
  derive_cmd->add_option("-o,--output", out_path, "Output case file")->required();

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", over.output_dir, "Override output_dir");
  };

  auto* gendata_cmd = app.add_subcommand("gendata", "Sample loads and label them with the OPF solver");
  add_config(gendata_cmd);
  gendata_cmd->add_flag("--tracking", opts.tracking, "Generate the expanding-network day instead");
  gendata_cmd->add_option("--jobs", opts.jobs, "Labeling threads")->check(CLI::PositiveNumber);
  gendata_cmd->add_flag("--no-provenance", no_provenance, "Leave timestamps and solve times out");
  gendata_cmd->add_option("--seed", over.seed, "Override the sampling seed");
  gendata_cmd->add_option("--samples", over.samples, "Override samples per network")->check(CLI::NonNegativeNumber);

  auto* train_cmd = app.add_subcommand("train", "Train the unified model (or one model per network)");
  add_config(train_cmd);
  train_cmd->add_flag("--separate", opts.separate, "Train a standalone model per network");
  train_cmd->add_flag("--resume", opts.resume, "Continue from the saved checkpoint");
  train_cmd->add_flag("--tracking", opts.tracking, "Train on the expanding-network day");
  train_cmd->add_option("--epochs", over.epochs, "Override the total epoch count")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--checkpoint", opts.checkpoint, "Checkpoint path");

  auto* eval_cmd = app.add_subcommand("eval", "Score a trained model on the test sets");
  add_config(eval_cmd);
  eval_cmd->add_flag("--separate", opts.separate, "Score the per-network models");
  eval_cmd->add_flag("--oracle-predictions", opts.oracle_predictions, "Score the oracle labels themselves");
  eval_cmd->add_flag("--no-provenance", no_provenance, "Leave timing fields out");
  eval_cmd->add_option("--checkpoint", opts.checkpoint, "Checkpoint path");
  eval_cmd->add_option("--dataset", opts.dataset, "Dataset directory");
  eval_cmd->add_option("-o,--output", opts.output, "Metrics file");

  auto* track_cmd = app.add_subcommand("track", "Run the tracking model over the expanding-network day");
  add_config(track_cmd);
  track_cmd->add_option("--checkpoint", opts.checkpoint, "Checkpoint path");
  track_cmd->add_option("--dataset", opts.dataset, "Tracking dataset directory");
  track_cmd->add_option("-o,--output", opts.output, "CSV file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  opts.provenance = !no_provenance;

  try {
    if (validate_cmd->parsed()) {
      const auto c = load_case_file(case_path);
      std::cout << c.name << ": " << c.num_buses() << " buses, " << c.num_generators() << " generators, "
                << c.branches.size() << " branches, " << c.load_buses().size() << " load buses\n";
    } else if (dump_cmd->parsed()) {
      std::cout << dump_case_json(load_case_file(case_path)) << "\n";
    } else if (derive_cmd->parsed()) {
      const auto c = derive_subnetwork(load_case_file(case_path), target);
      write_file(out_path, write_case(c));
      std::cout << "wrote " << out_path << " (" << c.num_buses() << " buses)\n";
    } else if (gendata_cmd->parsed()) {
      run_gendata(load_with(config_path, over), opts);
    } else if (train_cmd->parsed()) {
      run_train(load_with(config_path, over), opts);
    } else if (eval_cmd->parsed()) {
      run_eval(load_with(config_path, over), opts);
    } else if (track_cmd->parsed()) {
      run_track(load_with(config_path, over), opts);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
