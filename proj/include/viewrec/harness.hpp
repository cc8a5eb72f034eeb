#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "viewrec/observers.hpp"

namespace viewrec::harness {

struct ExperimentConfig {
  int k = 4;
  int n_objects = 3;
  int views_per_object = 8;
  double sigma = 0.05;
  double tau = 1.0;
  int trials = 500;
  bayes::MonteCarloParams mc;  // rotation_samples, model_samples
  std::uint64_t master_seed = 1;
  std::vector<std::string> observers = {"3d", "strongly_2d"};
  std::string output_path = ".";

  void validate() const;  // throws ConfigError
  geometry::Priors priors() const;
};

// flat key = value text; '#' comments; unknown keys are errors
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

struct World {
  std::vector<geometry::PointSet3D> models;  // one per object
  observers::LabeledViews training;
  observers::AnchorInfo anchors;
};

World generate_world(const ExperimentConfig& config, RandomStream& rng);

struct TrialRecord {
  int trial = 0;
  int truth = 0;
  std::vector<bayes::Decision> decisions;  // parallel to enabled observers
  std::vector<double> wall_ms;             // not serialized
  double recon_quality = 0.0;
  bool degenerate = false;
};

struct ObserverStats {
  std::string name;
  double error_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double mean_margin = 0.0;
};

struct Report {
  ExperimentConfig config;
  std::vector<ObserverStats> stats;
  std::vector<std::vector<double>> agreement;  // symmetric, unit diagonal
  int degenerate_trials = 0;
  int ess_collapses = 0;
  std::vector<TrialRecord> trials;
};

Report run_experiment(const ExperimentConfig& config, int jobs = 1);

std::string report_to_json(const Report& report);
Report report_from_json(const std::string& json_text);
std::string trials_to_csv(const Report& report);

// writes report.json and/or trials.csv under dir; format: json|csv|both
void write_report(const Report& report, const std::string& format,
                  const std::string& dir);

// binomial CI, normal approximation with continuity correction
std::pair<double, double> binomial_ci(int errors, int n);

}  // namespace viewrec::harness
