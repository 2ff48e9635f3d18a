// Command-line front end for the meta-RL benchmark library. All work happens
// through the C API; this file only assembles JSON requests from flags.
#include <glob.h>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "metarl.h"

namespace {

using nlohmann::json;

int fail(metarl_status status) {
  std::cerr << "error (" << static_cast<int>(status) << "): " << metarl_last_error()
            << "\n";
  return 1;
}

std::string call_or_exit(metarl_status (*fn)(const char*, char**), const json& request) {
  char* response = nullptr;
  const metarl_status status = fn(request.dump().c_str(), &response);
  if (status != METARL_OK) std::exit(fail(status));
  std::string out(response);
  metarl_string_free(response);
  return out;
}

void write_output(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body << "\n";
    return;
  }
  std::ofstream file(path);
  if (!file) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(1);
  }
  file << body << "\n";
}

json load_json_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) {
    std::cerr << "error: cannot read " << path << "\n";
    std::exit(1);
  }
  json parsed;
  file >> parsed;
  return parsed;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t results{};
  std::vector<std::string> paths;
  if (glob(pattern.c_str(), 0, nullptr, &results) == 0) {
    for (std::size_t i = 0; i < results.gl_pathc; ++i)
      paths.emplace_back(results.gl_pathv[i]);
  }
  globfree(&results);
  return paths;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-RL benchmark suite"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a recurrent policy");
  std::string train_config_path, train_out;
  train->add_option("--config", train_config_path, "Training config JSON file")
      ->required();
  train->add_option("--out", train_out, "Output directory (overrides config)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate an agent on seeded instances");
  std::string eval_agent, eval_task, eval_out, eval_params, eval_ckpt, eval_cache;
  int eval_instances = 1000;
  std::uint64_t eval_seed = 0;
  bool eval_argmax = false;
  eval->add_option("--agent", eval_agent, "Agent name (or 'policy')")->required();
  eval->add_option("--task", eval_task, "Task, e.g. bandit:k=5,n=10 | mdp:n=10")
      ->required();
  eval->add_option("--instances", eval_instances, "Instance count");
  eval->add_option("--seed", eval_seed, "Master seed");
  eval->add_option("--out", eval_out, "Report path (default stdout)");
  eval->add_option("--params", eval_params, "Agent hyperparameters, inline JSON");
  eval->add_option("--checkpoint", eval_ckpt, "Policy checkpoint (agent 'policy')");
  eval->add_option("--cache", eval_cache, "Index-table cache directory");
  eval->add_flag("--argmax", eval_argmax, "Act greedily instead of sampling");

  // gridsearch
  auto* grid = app.add_subcommand("gridsearch", "Tune hyperparameters");
  std::string grid_agent, grid_task, grid_out, grid_file, grid_cache;
  int grid_instances = 1000;
  std::uint64_t grid_seed = 0;
  grid->add_option("--agent", grid_agent, "Agent name")->required();
  grid->add_option("--task", grid_task, "Task string")->required();
  grid->add_option("--grid", grid_file, "Grid JSON file (default: built-in grid)");
  grid->add_option("--instances", grid_instances, "Tuning instance count");
  grid->add_option("--seed", grid_seed, "Master seed");
  grid->add_option("--out", grid_out, "Result path (default stdout)");
  grid->add_option("--cache", grid_cache, "Index-table cache directory");

  // distill
  auto* distill = app.add_subcommand("distill", "Clone the index policy");
  std::string distill_task, distill_out, distill_cache;
  int distill_trials = 2000, distill_epochs = 200;
  std::uint64_t distill_seed = 0;
  distill->add_option("--task", distill_task, "Bandit task string")->required();
  distill->add_option("--trials", distill_trials, "Teacher rollout count");
  distill->add_option("--epochs", distill_epochs, "Training epochs");
  distill->add_option("--seed", distill_seed, "Master seed");
  distill->add_option("--out", distill_out, "Output directory")->required();
  distill->add_option("--cache", distill_cache, "Index-table cache directory");

  // report
  auto* report = app.add_subcommand("report", "Tabulate evaluation reports");
  std::string report_inputs, report_format = "text", report_out;
  report->add_option("--inputs", report_inputs, "Glob of report JSON files")
      ->required();
  report->add_option("--format", report_format, "csv|text")
      ->check(CLI::IsMember({"csv", "text"}));
  report->add_option("--out", report_out, "Output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    json request = load_json_file(train_config_path);
    if (!train_out.empty()) request["out_dir"] = train_out;
    write_output("-", call_or_exit(metarl_train, request));
  } else if (eval->parsed()) {
    json request{{"agent", eval_agent}, {"task", eval_task},
                 {"instances", eval_instances}, {"seed", eval_seed}};
    if (!eval_params.empty()) request["params"] = json::parse(eval_params);
    if (!eval_ckpt.empty()) request["checkpoint"] = eval_ckpt;
    if (!eval_cache.empty()) request["cache_dir"] = eval_cache;
    if (eval_argmax) request["argmax"] = true;
    write_output(eval_out, call_or_exit(metarl_eval, request));
  } else if (grid->parsed()) {
    json request{{"agent", grid_agent}, {"task", grid_task},
                 {"instances", grid_instances}, {"seed", grid_seed}};
    if (!grid_file.empty()) request["grid"] = load_json_file(grid_file);
    if (!grid_cache.empty()) request["cache_dir"] = grid_cache;
    write_output(grid_out, call_or_exit(metarl_grid_search, request));
  } else if (distill->parsed()) {
    json request{{"task", distill_task},   {"trials", distill_trials},
                 {"epochs", distill_epochs}, {"seed", distill_seed},
                 {"out_dir", distill_out}};
    if (!distill_cache.empty()) request["cache_dir"] = distill_cache;
    write_output("-", call_or_exit(metarl_distill, request));
  } else if (report->parsed()) {
    json reports = json::array();
    for (const std::string& path : expand_glob(report_inputs))
      reports.push_back(load_json_file(path));
    if (reports.empty()) {
      std::cerr << "error: no reports matched " << report_inputs << "\n";
      return 1;
    }
    const std::string response =
        call_or_exit(metarl_report, json{{"reports", reports}});
    const json body = json::parse(response);
    write_output(report_out, body.at(report_format).get<std::string>());
  }
  return 0;
}
