#include "viewrec/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "viewrec/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace viewrec::harness {

namespace {

const std::set<std::string> kKnownObservers = {"3d", "strongly_2d", "nn",
                                               "kernel", "map"};

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (k < 1) throw ConfigError("config: k must be >= 1");
  if (n_objects < 2) throw ConfigError("config: n_objects must be >= 2");
  if (views_per_object < 1) {
    throw ConfigError("config: views_per_object must be >= 1");
  }
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (sigma <= 0.0) throw ConfigError("config: sigma must be > 0");
  if (tau <= 0.0) throw ConfigError("config: tau must be > 0");
  if (mc.rotation_samples < 1 || mc.model_samples < 1) {
    throw ConfigError("config: sample counts must be >= 1");
  }
  if (observers.empty()) throw ConfigError("config: no observers enabled");
  for (const auto& o : observers) {
    if (!kKnownObservers.count(o)) {
      throw ConfigError("config: unknown observer '" + o + "'");
    }
  }
  const bool exact_2d =
      std::find(observers.begin(), observers.end(), "strongly_2d") !=
      observers.end();
  if (exact_2d && n_objects * views_per_object < 2 * k + 1) {
    throw ConfigError(
        "config: strongly_2d exact mode needs n_objects*views_per_object >= "
        "2k+1");
  }
}

geometry::Priors ExperimentConfig::priors() const {
  geometry::Priors p;
  p.class_prior.assign(n_objects, 1.0 / n_objects);
  p.model_tau = tau;
  p.noise.sigma = sigma;
  return p;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    try {
      if (key == "k") {
        cfg.k = std::stoi(val);
      } else if (key == "n_objects") {
        cfg.n_objects = std::stoi(val);
      } else if (key == "views_per_object") {
        cfg.views_per_object = std::stoi(val);
      } else if (key == "sigma") {
        cfg.sigma = std::stod(val);
      } else if (key == "tau") {
        cfg.tau = std::stod(val);
      } else if (key == "trials") {
        cfg.trials = std::stoi(val);
      } else if (key == "rotation_samples") {
        cfg.mc.rotation_samples = std::stoi(val);
      } else if (key == "model_samples") {
        cfg.mc.model_samples = std::stoi(val);
      } else if (key == "master_seed") {
        cfg.master_seed = std::stoull(val);
      } else if (key == "output_path") {
        cfg.output_path = val;
      } else if (key == "observers") {
        cfg.observers.clear();
        std::istringstream os(val);
        std::string item;
        while (std::getline(os, item, ',')) {
          const std::string o = strip(item);
          if (!o.empty()) cfg.observers.push_back(o);
        }
      } else {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

World generate_world(const ExperimentConfig& config, RandomStream& rng) {
  const geometry::Priors priors = config.priors();
  World world;
  world.models.reserve(config.n_objects);
  const int n_views = config.n_objects * config.views_per_object;
  world.training.views.resize(2 * config.k, n_views);
  world.training.labels.resize(n_views);

  for (int object = 0; object < config.n_objects; ++object) {
    RandomStream mrng = rng.derive("model").derive(
        static_cast<std::uint64_t>(object));
    world.models.push_back(
        geometry::sample_model(priors, config.k, object, mrng));
    for (int j = 0; j < config.views_per_object; ++j) {
      RandomStream vrng = rng.derive("view")
                              .derive(static_cast<std::uint64_t>(object))
                              .derive(static_cast<std::uint64_t>(j));
      const geometry::Rotation3 rot = geometry::sample_rotation(vrng);
      const geometry::View clean =
          geometry::project(world.models.back(), rot);
      const int idx = object * config.views_per_object + j;
      world.training.views.col(idx) =
          geometry::add_noise(clean, priors.noise, vrng);
      world.training.labels[idx] = {object, j};
    }
  }
  world.anchors = observers::make_anchors(world.training);
  return world;
}

std::pair<double, double> binomial_ci(int errors, int n) {
  const double p = n > 0 ? double(errors) / n : 0.0;
  const double z = 1.959963984540054;
  const double half = z * std::sqrt(p * (1.0 - p) / n) + 0.5 / n;
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

namespace {

std::vector<edm::LabeledView> to_labeled_list(
    const observers::LabeledViews& base) {
  std::vector<edm::LabeledView> out;
  out.reserve(base.size());
  for (int i = 0; i < base.size(); ++i) {
    out.push_back({base.views.col(i), base.labels[i]});
  }
  return out;
}

}  // namespace

Report run_experiment(const ExperimentConfig& config, int jobs) {
  config.validate();
  const geometry::Priors priors = config.priors();
  RandomStream master(config.master_seed);
  RandomStream world_rng = master.derive("world");
  const World world = generate_world(config, world_rng);
  const auto base_list = to_labeled_list(world.training);

  const bool want_kernel =
      std::find(config.observers.begin(), config.observers.end(), "kernel") !=
      config.observers.end();
  const bool want_map =
      std::find(config.observers.begin(), config.observers.end(), "map") !=
      config.observers.end();

  observers::KernelWeights kernel_weights;
  if (want_kernel) {
    const double bw = observers::median_pairwise_distance(world.training);
    kernel_weights = observers::train_kernel(world.training, bw, 1e-6);
  }

  std::vector<geometry::PointSet3D> map_models;
  if (want_map) {
    for (int object = 0; object < config.n_objects; ++object) {
      Eigen::MatrixXd tv(2 * config.k, config.views_per_object);
      int c = 0;
      for (int i = 0; i < world.training.size(); ++i) {
        if (world.training.labels[i].object == object) {
          tv.col(c++) = world.training.views.col(i);
        }
      }
      RandomStream frng = master.derive("map-fit").derive(
          static_cast<std::uint64_t>(object));
      map_models.push_back(
          bayes::map_model_estimate(tv, priors, 50, frng).model);
      map_models.back().label = object;
    }
  }

  std::vector<TrialRecord> records(config.trials);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(std::max(jobs, 1))
#endif
  for (int t = 0; t < config.trials; ++t) {
    TrialRecord rec;
    rec.trial = t;
    RandomStream tstream =
        master.derive("trial").derive(static_cast<std::uint64_t>(t));

    // target draw
    {
      RandomStream lrng = tstream.derive("label");
      const double u = lrng.uniform();
      double cum = 0.0;
      rec.truth = config.n_objects - 1;
      for (int object = 0; object < config.n_objects; ++object) {
        cum += priors.class_prior[object];
        if (u < cum) {
          rec.truth = object;
          break;
        }
      }
    }
    RandomStream prng = tstream.derive("pose");
    const geometry::Rotation3 rot = geometry::sample_rotation(prng);
    RandomStream nrng = tstream.derive("noise");
    const geometry::View target = geometry::add_noise(
        geometry::project(world.models[rec.truth], rot), priors.noise, nrng);

    const RandomStream obs_stream = tstream.derive("obs");
    const edm::SimilaritySet sim = edm::similarity_set(target, base_list);

    for (const std::string& name : config.observers) {
      const auto start = std::chrono::steady_clock::now();
      bayes::Decision d;
      try {
        if (name == "3d") {
          d = observers::observer_3d(target, world.training, priors,
                                     config.mc, obs_stream);
        } else if (name == "strongly_2d") {
          d = observers::observer_strongly_2d(sim, world.anchors, priors,
                                              config.mc, obs_stream,
                                              &rec.recon_quality);
        } else if (name == "nn") {
          d = observers::observer_nn(sim);
        } else if (name == "kernel") {
          d = observers::score_kernel(sim, kernel_weights);
        } else if (name == "map") {
          std::map<int, bayes::LikelihoodEstimate> per_class;
          for (int object = 0; object < config.n_objects; ++object) {
            RandomStream crng = obs_stream.derive("map").derive(
                static_cast<std::uint64_t>(object));
            per_class[object] = bayes::likelihood_known_model(
                target, map_models[object], priors, config.mc, crng);
          }
          d = bayes::decide(per_class, priors);
        }
      } catch (const DegenerateInput&) {
        rec.degenerate = true;
      } catch (const AnchorMismatch&) {
        rec.degenerate = true;
      }
      const auto stop = std::chrono::steady_clock::now();
      rec.decisions.push_back(d);
      rec.wall_ms.push_back(
          std::chrono::duration<double, std::milli>(stop - start).count());
    }
    records[t] = std::move(rec);
  }

  // serial aggregation
  Report report;
  report.config = config;
  const int n_obs = static_cast<int>(config.observers.size());
  report.agreement.assign(n_obs, std::vector<double>(n_obs, 0.0));
  for (int a = 0; a < n_obs; ++a) {
    ObserverStats st;
    st.name = config.observers[a];
    int errors = 0;
    double margin_sum = 0.0;
    for (const auto& rec : records) {
      const auto& d = rec.decisions[a];
      if (d.chosen != rec.truth) ++errors;
      margin_sum += d.margin;
    }
    st.error_rate = double(errors) / config.trials;
    std::tie(st.ci_low, st.ci_high) = binomial_ci(errors, config.trials);
    st.mean_margin = margin_sum / config.trials;
    report.stats.push_back(st);
  }
  for (int a = 0; a < n_obs; ++a) {
    report.agreement[a][a] = 1.0;
    for (int b = a + 1; b < n_obs; ++b) {
      int agree = 0;
      for (const auto& rec : records) {
        if (rec.decisions[a].chosen == rec.decisions[b].chosen) ++agree;
      }
      const double frac = double(agree) / config.trials;
      report.agreement[a][b] = frac;
      report.agreement[b][a] = frac;
    }
  }
  for (const auto& rec : records) {
    if (rec.degenerate) ++report.degenerate_trials;
    for (const auto& d : rec.decisions) {
      report.ess_collapses += d.ess_collapse_count;
    }
  }
  report.trials = std::move(records);
  return report;
}

std::string report_to_json(const Report& report) {
  nlohmann::json j;
  j["config"] = {
      {"k", report.config.k},
      {"n_objects", report.config.n_objects},
      {"views_per_object", report.config.views_per_object},
      {"sigma", report.config.sigma},
      {"tau", report.config.tau},
      {"trials", report.config.trials},
      {"rotation_samples", report.config.mc.rotation_samples},
      {"model_samples", report.config.mc.model_samples},
      {"master_seed", report.config.master_seed},
      {"observers", report.config.observers},
  };
  j["stats"] = nlohmann::json::array();
  for (const auto& st : report.stats) {
    j["stats"].push_back({{"name", st.name},
                          {"error_rate", st.error_rate},
                          {"ci_low", st.ci_low},
                          {"ci_high", st.ci_high},
                          {"mean_margin", st.mean_margin}});
  }
  j["agreement"] = report.agreement;
  j["degenerate_trials"] = report.degenerate_trials;
  j["ess_collapses"] = report.ess_collapses;
  j["trials"] = nlohmann::json::array();
  for (const auto& rec : report.trials) {
    nlohmann::json row = {{"trial", rec.trial}, {"truth", rec.truth}};
    nlohmann::json chosen = nlohmann::json::array();
    nlohmann::json margin = nlohmann::json::array();
    for (const auto& d : rec.decisions) {
      chosen.push_back(d.chosen);
      margin.push_back(d.margin);
    }
    row["chosen"] = chosen;
    row["margin"] = margin;
    j["trials"].push_back(row);
  }
  return j.dump(2) + "\n";
}

Report report_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  Report report;
  const auto& c = j.at("config");
  report.config.k = c.at("k");
  report.config.n_objects = c.at("n_objects");
  report.config.views_per_object = c.at("views_per_object");
  report.config.sigma = c.at("sigma");
  report.config.tau = c.at("tau");
  report.config.trials = c.at("trials");
  report.config.mc.rotation_samples = c.at("rotation_samples");
  report.config.mc.model_samples = c.at("model_samples");
  report.config.master_seed = c.at("master_seed");
  report.config.observers = c.at("observers").get<std::vector<std::string>>();
  for (const auto& st : j.at("stats")) {
    report.stats.push_back({st.at("name"), st.at("error_rate"),
                            st.at("ci_low"), st.at("ci_high"),
                            st.at("mean_margin")});
  }
  report.agreement =
      j.at("agreement").get<std::vector<std::vector<double>>>();
  report.degenerate_trials = j.at("degenerate_trials");
  report.ess_collapses = j.at("ess_collapses");
  for (const auto& row : j.at("trials")) {
    TrialRecord rec;
    rec.trial = row.at("trial");
    rec.truth = row.at("truth");
    const auto chosen = row.at("chosen").get<std::vector<int>>();
    const auto margin = row.at("margin").get<std::vector<double>>();
    for (size_t i = 0; i < chosen.size(); ++i) {
      bayes::Decision d;
      d.chosen = chosen[i];
      d.margin = margin[i];
      rec.decisions.push_back(d);
    }
    report.trials.push_back(rec);
  }
  return report;
}

std::string trials_to_csv(const Report& report) {
  std::string out = "trial,truth";
  for (const auto& name : report.config.observers) {
    out += "," + name + "_chosen," + name + "_margin";
  }
  out += "\n";
  for (const auto& rec : report.trials) {
    out += std::to_string(rec.trial) + "," + std::to_string(rec.truth);
    for (const auto& d : rec.decisions) {
      out += "," + std::to_string(d.chosen) + "," + fmt_double(d.margin);
    }
    out += "\n";
  }
  return out;
}

void write_report(const Report& report, const std::string& format,
                  const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
  const auto write = [&](const std::string& name, const std::string& body) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path);
    out << body;
  };
  if (format == "json" || format == "both") {
    write("report.json", report_to_json(report));
  }
  if (format == "csv" || format == "both") {
    write("trials.csv", trials_to_csv(report));
  }
  if (format != "json" && format != "csv" && format != "both") {
    throw ConfigError("unknown report format: " + format);
  }
}

}  // namespace viewrec::harness
