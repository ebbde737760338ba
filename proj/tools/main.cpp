#include "runner.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Markov-modulated affine processes: transforms, simulation and pricing"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario file");
  std::string file;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  run->add_option("file", file, "Scenario file (YAML)")->required();
  auto* out_opt = run->add_option("--out", out, "Output directory (overrides the file)");
  auto* seed_opt = run->add_option("--seed", seed, "Random seed (overrides the file)");
  auto* threads_opt = run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : modaff::cli::kExitSchema;
  }

  modaff::cli::RunOptions opt;
  if (*out_opt) opt.out_dir = out;
  if (*seed_opt) opt.seed = seed;
  if (*threads_opt) opt.threads = threads;
  return modaff::cli::run_file(file, opt, std::cout, std::cerr);
}
