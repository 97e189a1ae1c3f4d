// tnfp: estimate-domain, train, refine, eval, export-slice, integrate-table.
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "tnfp/commands.hpp"
#include "tnfp/config.hpp"
#include "tnfp/errors.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kInput = 2, kDivergence = 3, kNumerical = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady-state Fokker-Planck solver with tensor neural networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> precision;
  auto add_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "output file")->required();
    cmd->add_option("--seed", seed, "overrides the config seed");
    cmd->add_option("--threads", threads, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--precision", precision, "single or double")->check(CLI::IsMember({"single", "double"}));
  };

  using Command = void (*)(const tnfp::RunConfig&, const std::string&, std::ostream&);
  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"estimate-domain", {tnfp::cmd_estimate_domain, "simulate the SDE and write the domain file"}},
      {"train", {tnfp::cmd_train, "train a model and write its checkpoint and loss CSV"}},
      {"refine", {tnfp::cmd_refine, "write the refined domain of a trained model"}},
      {"eval", {tnfp::cmd_eval, "relative errors against the exact density (CSV)"}},
      {"export-slice", {tnfp::cmd_export_slice, "two-coordinate slice of the density (CSV)"}},
      {"integrate-table", {tnfp::cmd_integrate_table, "integrals over cubes of given radii (CSV)"}},
  };
  std::map<CLI::App*, Command> handlers;
  for (const auto& [name, entry] : commands) {
    CLI::App* cmd = app.add_subcommand(name, entry.second);
    add_flags(cmd);
    handlers[cmd] = entry.first;
  }
  CLI11_PARSE(app, argc, argv);

  try {
    tnfp::RunConfig config = config_path.empty() ? tnfp::default_config("ring2d") : tnfp::load_config(config_path);
    if (seed) {
      config.seed = *seed;
      config.sde.seed = *seed;
      config.train.seed = *seed;
    }
    if (threads) config.threads = *threads;
    if (precision) config.precision = tnfp::parse_precision(*precision);
    if (config.threads > 0) omp_set_num_threads(config.threads);
    handlers.at(app.get_subcommands().front())(config, out, std::cerr);
  } catch (const tnfp::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const tnfp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const tnfp::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const tnfp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const tnfp::ParameterError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
