#pragma once

#include "resonances.hpp"

#include <map>
#include <string>
#include <vector>

namespace an3 {

constexpr int kSchemaVersion = 1;
constexpr const char* kToolVersion = "0.4.0";

struct Budgets {
  int period_max = 10;
  long long periodic_points = 20000000;
  int homotopy_steps = 10;
  int entropy_levels = 12;
  std::vector<int> K{6, 8, 10};
  int projector_K = 8;
  int quad_n = 48;
  int eigenvalues = 12;
  int pullback_steps = 40;
  std::vector<int> margulis_n{8, 10, 12};
  int local_product_n = 10;
  int zeta_N = 10;
  int integrability_period_max = 8;
  int volume_points = 10;
  int volume_n_min = 2;
  int volume_n_max = 12;
};

struct Tolerances {
  double splitting_linear = 1e-10;
  double triple = 0.03;
  double eigen_real = 1e-8;
  double gap = 0.2;
  double drift = 1e-3;
  double spurious_drift = 1e-1;
  double pairing = 1e-2;
  double determinant = 1e-4;
  double integrability = 1e-4;
  double local_product = 3e-2;
  double linear_margulis = 1e-8;
  double volume_ratio = 4.0;
  double seed_agreement = 1e-3;
  double projector_bowen = 3e-2;
};

struct Geometry {
  Vec3 base_point{0.3, 0.7, 0.1};
  double entropy_delta = 0.05;
  double max_seg = 0.05;
  double density_window = 0.1;
  int density_bins = 16;
  std::vector<double> holonomy_radii{0.1, 0.05};
  int holonomy_bins = 8;
  int cs_grid = 12;
  int splitting_points = 16;
  double determinant_radius = 0.08;
  int determinant_points = 5;
  double omega_offset = 0.05;
  double cone_aperture = 0.5;
  int validate_grid = 32;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  IMat3 matrix{};
  std::vector<TrigTerm> terms;
  double epsilon = 0.0;
  double cone_L = 0.25;
  uint64_t seed = 12345;
  std::vector<std::string> tasks;
  std::string output_dir = "an3_out";
  int workers = 1;
  Budgets budgets;
  Tolerances tol;
  Geometry geom;
  std::vector<Observable> observables;
  std::string canonical;  // canonical JSON of the effective config
};

const std::vector<std::string>& known_tasks();

// throws Error(ConfigError) with the offending field path
RunConfig parse_config(const std::string& json_text);
// keep only the listed tasks (comma separated); unknown names are a ConfigError
void filter_tasks(RunConfig& cfg, const std::string& csv);

struct RunOutput {
  std::string report_json;
  std::vector<std::pair<std::string, std::string>> tables;  // name -> csv text, in emission order
  int flags_total = 0;
  int flags_failed = 0;
  int task_errors = 0;
  bool internal_error = false;
  int exit_code() const { return internal_error ? 3 : (flags_failed > 0 || task_errors > 0) ? 1 : 0; }
};

RunOutput run_experiment(const RunConfig& cfg);
// report.json + tables/*.csv; throws Error(IoError)
void write_outputs(const RunOutput& out, const std::string& dir);

std::string fnv1a_hex(const std::string& s);

}  // namespace an3
