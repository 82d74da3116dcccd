#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "hypervar/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Minimizer shadowing experiments on hyperbolic surfaces"};
  app.require_subcommand(1, 1);

  hypervar::cli::RunOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;

  const std::map<std::string, std::string> about = {
      {"geom", "Disk geometry queries read from stdin"},
      {"minimize", "Solve one action-minimizing boundary-value problem"},
      {"shadow", "Minimizers along a chord for several N, with Hausdorff distances"},
      {"qg", "Quasi-geodesic check or fit for a curve CSV"},
      {"constants", "Action-window and shadowing constants"},
      {"twist", "Twist-map orbit or discrete-action critical sequence"},
      {"semiconj", "Orbit projections, averaged shadow parameter and cocycles"},
  };
  for (const std::string& name : hypervar::cli::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    auto* cfg = sub->add_option("--config", opts.config_path, "JSON configuration file");
    if (name != "geom") cfg->required();
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "RNG seed (overrides the config)");
    sub->add_flag("--dry-run", opts.dry_run, "Print the resolved parameters and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  opts.subcommand = chosen->get_name();
  if (chosen->count("--out")) opts.out_dir = out_dir;
  if (chosen->count("--seed")) opts.seed = seed;
  return hypervar::cli::run(opts, std::cin, std::cout, std::cerr);
}
