// sharpness-lab: command-line front end for the sharplab library.
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sharplab/cli/commands.hpp"
#include "sharplab/cli/config.hpp"
#include "sharplab/dataset.hpp"
#include "sharplab/errors.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Args {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

std::filesystem::path resolve_out(const Args& args, const sharplab::cli::ExperimentConfig& cfg) {
  if (!args.out.empty()) return args.out;
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("SHARPNESS_LAB_OUT"); env && *env) return env;
  return "sharpness-lab-out";
}

int run(const std::string& command, const Args& args, bool seed_given) {
  using namespace sharplab;
  try {
    const cli::ExperimentConfig cfg = cli::load_config(args.config);
    cli::CommandOptions opts;
    opts.out_dir = resolve_out(args, cfg);
    if (seed_given) opts.seed = args.seed;
    opts.threads = args.threads;
    std::filesystem::create_directories(opts.out_dir);
    const cli::CommandResult result = cli::run_command(command, cfg, opts);
    for (const auto& [name, value] : result.summary) std::cout << name << " = " << cli::format_double(value) << "\n";
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Sharpness measures: estimation, regularized training and spectral reconstruction.\n"
      "Output directory: --out, else output.dir in the config, else $SHARPNESS_LAB_OUT, else ./sharpness-lab-out.\n"
      "Exit codes: 0 ok, 2 config or domain error, 3 numerical error, 4 I/O error."};
  app.require_subcommand(1);
  Args args;
  std::string chosen;
  std::vector<CLI::Option*> seed_opts;
  for (const auto& name : sharplab::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory");
    seed_opts.push_back(sub->add_option("--seed", args.seed, "overrides study.seeds"));
    sub->add_option("--threads", args.threads, "worker threads for multi-run commands")->check(CLI::PositiveNumber);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  bool seed_given = false;
  for (auto* o : seed_opts) seed_given = seed_given || o->count() > 0;
  return run(chosen, args, seed_given);
}
