// fairsight: synth | calibrate | apply | evaluate | sweep
//
// Settings come from --config (flat key=value), then --set overrides, then
// the dedicated flags. Errors print one line
//   fairsight: error[CODE]: message
// and exit 2 for configuration problems, 3 for data problems.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "fairsight/config.hpp"
#include "fairsight/error.hpp"
#include "fairsight/pipeline.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

int report(std::string_view code, const std::string& message, int exit_code) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "fairsight: error[" << code << "]: " << line << '\n';
  return exit_code;
}

struct Common {
  std::string config_path;
  std::string seed;
  std::string task;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "settings file (key=value per line)");
  cmd->add_option("--seed", c.seed, "scenario seed");
  cmd->add_option("--task", c.task, "classification or detection");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.sets, "override one setting, key=value")->take_all();
}

fairsight::Config build_config(const Common& c, const std::string& axis,
                               const std::string& values, bool stream) {
  fairsight::Config cfg;
  if (!c.config_path.empty()) cfg = fairsight::Config::load(c.config_path);
  for (const auto& s : c.sets) cfg.assign(s);
  if (!c.seed.empty()) cfg.set("scenario.seed", c.seed);
  if (!c.task.empty()) cfg.set("task", c.task);
  if (!c.out.empty()) cfg.set("paths.out", c.out);
  if (!axis.empty()) cfg.set("sweep.axis", axis);
  if (!values.empty()) cfg.set("sweep.values", values);
  if (stream) cfg.set("paths.test", "-");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware conformal calibration and post-hoc repair"};
  app.require_subcommand(1);

  Common common;
  std::string axis, values;
  bool stream = false;

  auto* synth = app.add_subcommand("synth", "write seeded calibration and test JSONL");
  auto* calibrate = app.add_subcommand("calibrate", "fit thresholds and write the artifact");
  auto* apply = app.add_subcommand("apply", "score and repair test records");
  auto* evaluate = app.add_subcommand("evaluate", "before/after metric report");
  auto* sweep = app.add_subcommand("sweep", "calibrate+apply+evaluate per hyperparameter value");
  for (auto* cmd : {synth, calibrate, apply, evaluate, sweep}) add_common(cmd, common);
  apply->add_flag("--stream", stream, "read records on stdin, write outcomes on stdout");
  sweep->add_option("--axis", axis, "lambda, gamma, eta or kappa");
  sweep->add_option("--values", values, "comma-separated values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("USAGE", e.what(), kConfigExit);
  }

  try {
    const fairsight::RunConfig cfg =
        fairsight::load_run_config(build_config(common, axis, values, stream));
    if (synth->parsed()) fairsight::cmd_synth(cfg, std::cout);
    if (calibrate->parsed()) fairsight::cmd_calibrate(cfg, std::cout);
    if (apply->parsed()) {
      std::ostream& log = cfg.test_path == "-" ? std::cerr : std::cout;
      fairsight::cmd_apply(cfg, std::cin, std::cout, log);
    }
    if (evaluate->parsed()) fairsight::cmd_evaluate(cfg, std::cout);
    if (sweep->parsed()) fairsight::cmd_sweep(cfg, std::cout);
  } catch (const fairsight::Error& e) {
    return report(fairsight::to_string(e.code()), e.what(),
                  fairsight::is_config_error(e.code()) ? kConfigExit : kDataExit);
  } catch (const std::exception& e) {
    return report("INTERNAL", e.what(), kDataExit);
  }
  return 0;
}
