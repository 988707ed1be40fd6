#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shpar/harness.hpp"

int main(int argc, char** argv) {
  using namespace shpar::harness;
  CLI::App app{"harness: run the one-liner corpus sequentially and in parallel, compare outputs"};
  app.require_subcommand(1);
  auto* list = app.add_subcommand("list", "List corpus cases");
  auto* run = app.add_subcommand("run", "Run corpus cases");
  std::vector<std::string> cases;
  std::string widths = "1,2,4,8";
  double size_mb = 50;
  std::string report;
  HarnessOptions opts;
  std::string work;
  run->add_option("--case", cases, "Case name (repeatable); default all");
  run->add_option("--widths", widths, "Comma-separated widths");
  run->add_option("--size", size_mb, "Input size in MB")->check(CLI::PositiveNumber);
  run->add_option("--report", report, "Write a JSON report here");
  run->add_option("--seed", opts.seed, "Input generator seed");
  run->add_option("--work", work, "Work directory root (default $TMPDIR)");
  run->add_flag("--keep", opts.keep_work, "Keep generated inputs and scripts");
  CLI11_PARSE(app, argc, argv);

  auto all = corpus();
  if (*list) {
    for (const auto& c : all) std::cout << c.name << "\t" << c.structure << "\n";
    return 0;
  }
  opts.size_bytes = static_cast<std::size_t>(size_mb * 1024 * 1024);
  if (!work.empty()) opts.work_root = work;
  shpar::RuntimeConfig env_cfg;
  shpar::apply_environment(env_cfg);
  opts.annotation_dir = env_cfg.annotation_dir;
  opts.runtime_dir = env_cfg.runtime_dir;

  std::vector<int> ws;
  std::stringstream ss(widths);
  for (std::string item; std::getline(ss, item, ',');) ws.push_back(std::stoi(item));
  std::vector<const BenchmarkCase*> selected;
  if (cases.empty()) {
    for (const auto& c : all) selected.push_back(&c);
  } else {
    for (const auto& n : cases) {
      const BenchmarkCase* c = find_case(all, n);
      if (!c) {
        std::cerr << "harness: unknown case '" << n << "'\n";
        return 2;
      }
      selected.push_back(c);
    }
  }

  std::vector<CaseResult> results;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  bool ok = true;
  try {
    for (const BenchmarkCase* c : selected) {
      Workspace space(*c, opts);
      for (int w : ws) {
        results.push_back(run_case(*c, w, space, opts));
        j.push_back(result_json(results.back()));
        ok = ok && results.back().equal();
        std::cerr << c->name << " w" << w << (results.back().equal() ? " ok" : " MISMATCH") << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "harness: " << e.what() << "\n";
    return 2;
  }
  std::cout << results_table(results);
  if (!report.empty()) std::ofstream(report) << j.dump(2) << "\n";
  return ok ? 0 : 1;
}
