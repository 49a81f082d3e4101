#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "frk/app/pipeline.hpp"
#include "frk/error.hpp"

namespace {

using Command = std::vector<std::string> (*)(const frk::app::RunConfig&);

int run(Command cmd, const std::string& config, const std::vector<std::string>& overrides) {
  try {
    const auto cfg = frk::app::load_config(config, overrides);
    for (const auto& w : cmd(cfg)) std::cerr << "warning: " << w << '\n';
    return 0;
  } catch (const frk::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return frk::exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return frk::exit_code(frk::ErrorKind::io);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial and spatio-temporal fixed rank kriging for non-Gaussian data"};
  app.require_subcommand(1);
  std::string config;
  std::vector<std::string> overrides;
  Command chosen = nullptr;
  const std::vector<std::pair<const char*, std::pair<const char*, Command>>> cmds{
      {"simulate", {"Simulate data and withheld truth for a scenario", &frk::app::cmd_simulate}},
      {"fit", {"Estimate parameters and save the fit state", &frk::app::cmd_fit}},
      {"predict", {"Predict at BAUs or regions from a saved fit", &frk::app::cmd_predict}},
      {"score", {"Score predictions against the truth", &frk::app::cmd_score}},
  };
  for (const auto& [name, info] : cmds) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("-c,--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "Override a config entry, e.g. model.n_res=3");
    const Command cmd = info.second;
    sub->callback([&chosen, cmd] { chosen = cmd; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return run(chosen, config, overrides);
}
