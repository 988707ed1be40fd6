#include <CLI11.hpp>
#include <iostream>

#include "shpar/driver.hpp"

int main(int argc, char** argv) {
  shpar::RuntimeConfig cfg;
  CLI::App app{"shpar: compile a shell script into a data-parallel one and run it"};
  app.set_version_flag("-v,--version", std::string("shpar ") + shpar::kVersion);
  std::string input;
  std::string termination = "clean_up_graph";
  std::string command;
  int width = 0;
  std::string log_file, config_path;
  app.add_option("input", input, "The script to be compiled and executed.");
  app.add_option("args", cfg.script_args, "Arguments passed to the script.");
  app.add_flag("--preprocess_only", cfg.preprocess_only, "Pre-process (not execute) input script.");
  app.add_flag("--output_preprocessed", cfg.output_preprocessed, "Output the preprocessed script.");
  app.add_option("-c,--command", command, "Evaluate the following COMMAND as a script, rather than a file.");
  app.add_option("-w,--width", width, "Set degree of data-parallelism.")->check(CLI::PositiveNumber);
  app.add_flag("--no_optimize", cfg.no_optimize, "Not apply transformations over the DFG.");
  app.add_flag("--dry_run_compiler", cfg.dry_run_compiler, "Not execute the compiled script, even if the compiler succeeded.");
  app.add_flag("--assert_compiler_success", cfg.assert_compiler_success, "Assert that the compiler succeeded.");
  app.add_flag("-t,--output_time", cfg.output_time, "Output the time it took for every step.");
  app.add_flag("-p,--output_optimized", cfg.output_optimized, "Output the parallel script for inspection.");
  app.add_option("-d,--debug", cfg.debug, "Configure debug level; defaults to 0.")->check(CLI::Range(0, 3));
  app.add_option("--log_file", log_file, "Location of log file; defaults to stderr.");
  app.add_flag("--no_eager", cfg.no_eager, "Disable eager nodes before merging nodes.");
  app.add_option("--termination", termination, "Termination behavior of the DFG.")
      ->check(CLI::IsMember({"clean_up_graph", "drain_stream"}));
  app.add_option("--config_path", config_path, "Config file (JSON) with annotation_dir, runtime_dir, width, shell.");
  app.positionals_at_end();
  CLI11_PARSE(app, argc, argv);

  if (!input.empty()) cfg.input = input;
  if (app.count("--command")) cfg.command = command;
  if (width > 0) cfg.width = width;
  if (!log_file.empty()) cfg.log_file = log_file;
  if (!config_path.empty()) cfg.config_path = config_path;
  cfg.termination = termination == "drain_stream" ? shpar::Termination::DrainStream : shpar::Termination::CleanUpGraph;
  if (!cfg.input && !cfg.command) {
    std::cerr << app.help();
    return 2;
  }
  return shpar::run(cfg);
}
