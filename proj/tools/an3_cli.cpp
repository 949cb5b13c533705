#include <anosov3/anosov3.h>

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInternal = 3;

int exit_for(an3_status s) { return (s == AN3_CONFIG_ERROR || s == AN3_INVALID_ARGUMENT) ? kExitConfig : kExitInternal; }

// output_dir from the config, if any; parse errors are left to the library
std::string config_output_dir(const std::string& text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_object() && j.contains("output_dir") && j["output_dir"].is_string()) return j["output_dir"].get<std::string>();
  return "an3_out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"an3: numerical experiments for a partially hyperbolic perturbation of a 3-torus automorphism"};
  app.set_version_flag("--version", an3_version_string());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the tasks of a JSON config");
  std::string config_path, tasks, out_dir;
  int workers = 0;
  bool quiet = false;
  run->add_option("config", config_path, "config file (JSON)")->required();
  run->add_option("--tasks", tasks, "comma separated subset of the configured tasks");
  run->add_option("--out", out_dir, "output directory (default: config output_dir)");
  run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_flag("-q,--quiet", quiet, "only print errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  std::ifstream f(config_path, std::ios::binary);
  if (!f) {
    std::cerr << "an3: cannot read " << config_path << "\n";
    return kExitConfig;
  }
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  if (out_dir.empty()) out_dir = config_output_dir(text);

  an3_report* rep = nullptr;
  an3_status st = an3_run_json(text.c_str(), tasks.empty() ? nullptr : tasks.c_str(), workers, &rep);
  if (st != AN3_OK) {
    std::cerr << "an3: " << an3_status_name(st) << ": " << an3_last_error() << "\n";
    return exit_for(st);
  }
  st = an3_report_write(rep, out_dir.c_str());
  if (st != AN3_OK) {
    std::cerr << "an3: " << an3_status_name(st) << ": " << an3_last_error() << "\n";
    an3_report_free(rep);
    return kExitInternal;
  }

  int rc = an3_report_exit_code(rep);
  if (!quiet) {
    auto j = nlohmann::ordered_json::parse(an3_report_json(rep));
    for (auto& [name, block] : j["tasks"].items()) {
      if (block["status"] == "error") {
        std::printf("%-14s ERROR %s: %s\n", name.c_str(), block["error"]["code"].get<std::string>().c_str(),
                    block["error"]["message"].get<std::string>().c_str());
        continue;
      }
      for (auto& fl : block["flags"]) {
        std::printf("%-14s %-4s %s = %s\n", name.c_str(), fl["pass"].get<bool>() ? "ok" : "FAIL",
                    fl["name"].get<std::string>().c_str(), fl["value"].dump().c_str());
      }
    }
    auto& s = j["summary"];
    std::printf("flags %d/%d passed, %d task errors -> %s (exit %d)\n",
                s["flags_total"].get<int>() - s["flags_failed"].get<int>(), s["flags_total"].get<int>(),
                s["task_errors"].get<int>(), out_dir.c_str(), rc);
  }
  an3_report_free(rep);
  return rc;
}
