#include <CLI11.hpp>
#include <iostream>

#include "opcert/cli/commands.hpp"

namespace opcert::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformalized wavelet neural operator ensembles on synthetic PDE data"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  auto global = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "worker threads (default: OPCERT_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
  };

  std::string config, out_path, data, ckpt, qfield, qfield_out;
  std::optional<double> alpha;

  auto* gen = app.add_subcommand("generate-data", "write train/calibration/test splits and a manifest");
  gen->add_option("--config", config, "run configuration")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "output directory (created if missing)")->required();
  global(gen);

  auto* train = app.add_subcommand("train", "train an ensemble or a quantile pair");
  train->add_option("--config", config, "run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out_path, "checkpoint directory")->required();
  global(train);

  auto* cal = app.add_subcommand("calibrate", "per-location split conformal calibration");
  cal->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  cal->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  cal->add_option("--alpha", alpha, "miscoverage level (default from the checkpoint run)");
  cal->add_option("--out", out_path, "q-field file")->required();
  global(cal);

  auto* eval = app.add_subcommand("evaluate", "coverage and NMSE on the test split");
  eval->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--qfield", qfield, "q-field file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out_path, "report CSV")->required();
  global(eval);

  auto* sr = app.add_subcommand("superres", "GP-mapped q and coverage on a finer grid");
  sr->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  sr->add_option("--qfield", qfield, "q-field on the training grid")->required()->check(CLI::ExistingFile);
  sr->add_option("--data-hi", data, "dataset directory holding test_hi.opd")->required()->check(CLI::ExistingDirectory);
  sr->add_option("--out", out_path, "report CSV")->required();
  sr->add_option("--qfield-out", qfield_out, "also write the mapped q-field");
  global(sr);

  auto* spk = app.add_subcommand("spiking-report", "spiking activity per VSN site");
  spk->add_option("--ckpt", ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  spk->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  spk->add_option("--out", out_path, "report CSV")->required();
  global(spk);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--threads")) o.threads = threads;
  const std::string name = sub->get_name();
  try {
    if (sub == gen) cmd_generate_data(config, out_path, o, out);
    else if (sub == train) cmd_train(config, data, out_path, o, out);
    else if (sub == cal) cmd_calibrate(ckpt, data, alpha, out_path, o, out);
    else if (sub == eval) cmd_evaluate(ckpt, qfield, data, out_path, o, out);
    else if (sub == sr) cmd_superres(ckpt, qfield, data, out_path, qfield_out, o, out);
    else cmd_spiking_report(ckpt, data, out_path, o, out);
  } catch (const Error& e) {
    err << name << ": " << e.what() << "\n";
    return exit_code_for(e.code(), name);
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << '\n';
    return exit_failure;
  }
  return exit_ok;
}

}  // namespace opcert::cli
