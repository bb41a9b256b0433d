// Copyright 2026 The CREAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cream/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual identifier-debiasing experiments on synthetic code"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;

  for (const char* name : {"gen", "train", "eval", "sweep", "attack"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config file (key = value lines)")->required();
    sub->add_option("--seed", seed, "root seed, overrides the config file");
    sub->add_option("--workers", workers, "threads for evaluation and attack");
    sub->add_option("--out", out_dir, "output directory, overrides out_dir");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cream::cli::kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  cream::cli::ExperimentConfig config;
  try {
    config = cream::cli::parse_config(cream::cli::read_file(config_path));
  } catch (const cream::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cream::cli::kIoFailure;
  } catch (const cream::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cream::cli::kConfigError;
  }
  if (seed) config.set_seed(*seed);
  if (workers) config.workers = *workers;
  if (out_dir) config.out_dir = *out_dir;
  return cream::cli::run(command, config, std::cerr);
}
