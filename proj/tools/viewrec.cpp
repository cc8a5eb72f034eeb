#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "viewrec/errors.hpp"
#include "viewrec/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitIo = 4;

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw viewrec::IoError("cannot read matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw viewrec::IoError("empty matrix file: " + path);
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) {
      throw viewrec::IoError("ragged matrix file: " + path);
    }
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void print_coords(std::ostream& out, const Eigen::MatrixXd& pts) {
  char buf[64];
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    for (Eigen::Index d = 0; d < pts.rows(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", pts(d, i));
      out << (d ? "," : "") << buf;
    }
    out << "\n";
  }
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 bool seed_set, const std::string& out_dir,
                 const std::string& format, int jobs) {
  viewrec::harness::ExperimentConfig cfg =
      viewrec::harness::parse_config_file(config_path);
  if (seed_set) cfg.master_seed = seed;
  std::string dir = out_dir.empty() ? cfg.output_path : out_dir;
  const viewrec::harness::Report report =
      viewrec::harness::run_experiment(cfg, jobs);
  viewrec::harness::write_report(report, format, dir);
  for (const auto& st : report.stats) {
    std::cout << st.name << ": error_rate=" << st.error_rate << " ci=["
              << st.ci_low << "," << st.ci_high << "]\n";
  }
  return 0;
}

int cmd_reconstruct(const std::string& matrix_path, int dim,
                    const std::string& method, const std::string& out_path) {
  viewrec::edm::DistanceMatrix d;
  d.entries = read_matrix_csv(matrix_path);

  nlohmann::json sidecar = {{"dimension", dim}, {"degenerate", false},
                            {"quality", 0.0}};
  viewrec::edm::Embedding emb;
  try {
    emb = method == "spectral"
              ? viewrec::edm::reconstruct_spectral(d, dim)
              : viewrec::edm::reconstruct_incremental(d, dim);
  } catch (const viewrec::DegenerateInput& e) {
    sidecar["degenerate"] = true;
    sidecar["error"] = e.what();
    if (out_path.empty()) {
      std::cerr << sidecar.dump(2) << "\n";
    } else {
      std::ofstream side(out_path + ".json");
      side << sidecar.dump(2) << "\n";
    }
    return kExitDegenerate;
  }
  sidecar["quality"] = emb.quality;

  if (out_path.empty()) {
    print_coords(std::cout, emb.points);
    std::cerr << sidecar.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw viewrec::IoError("cannot write: " + out_path);
    print_coords(out, emb.points);
    std::ofstream side(out_path + ".json");
    if (!side) throw viewrec::IoError("cannot write: " + out_path + ".json");
    side << sidecar.dump(2) << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& config_path, int jobs) {
  viewrec::harness::ExperimentConfig cfg =
      viewrec::harness::parse_config_file(config_path);
  const viewrec::harness::Report report =
      viewrec::harness::run_experiment(cfg, jobs);
  std::cout << "agreement matrix:\n";
  std::cout << "            ";
  for (const auto& name : cfg.observers) std::cout << name << " ";
  std::cout << "\n";
  for (size_t a = 0; a < cfg.observers.size(); ++a) {
    std::cout << cfg.observers[a] << ": ";
    for (size_t b = 0; b < cfg.observers.size(); ++b) {
      std::cout << report.agreement[a][b] << " ";
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_interleave(bool encode, const std::string& digits, double offset,
                   int k) {
  const auto dot = digits.find('.');
  if (dot == std::string::npos) {
    throw viewrec::ConfigError("--digits must look like P.Q");
  }
  viewrec::codec::FixedPointCodec codec;
  codec.int_digits = std::stoi(digits.substr(0, dot));
  codec.frac_digits = std::stoi(digits.substr(dot + 1));
  codec.offset = offset;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (encode) {
      std::vector<double> vals;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
      Eigen::VectorXd x(vals.size());
      for (size_t i = 0; i < vals.size(); ++i) x(i) = vals[i];
      std::cout << viewrec::codec::interleave_encode(x, codec) << "\n";
    } else {
      const Eigen::VectorXd x =
          viewrec::codec::interleave_decode(line, k, codec);
      char buf[64];
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", x(i));
        std::cout << (i ? "," : "") << buf;
      }
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"view-based recognition simulation laboratory"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a full experiment");
  std::string sim_config;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  std::string sim_format = "both";
  int sim_jobs = 1;
  sim->add_option("--config", sim_config, "config file")->required();
  auto* seed_opt = sim->add_option("--seed", sim_seed, "master seed override");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--format", sim_format, "csv|json|both");
  sim->add_option("--jobs", sim_jobs, "worker threads");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct",
                                 "embed a distance matrix from CSV");
  std::string rec_matrix;
  int rec_dim = 2;
  std::string rec_method = "incremental";
  std::string rec_out;
  rec->add_option("--matrix", rec_matrix, "CSV distance matrix")->required();
  rec->add_option("--dim", rec_dim, "target dimension")->required();
  rec->add_option("--method", rec_method, "incremental|spectral");
  rec->add_option("--out", rec_out, "coordinates output path");

  // compare-observers
  auto* cmp = app.add_subcommand("compare-observers",
                                 "print the decision-agreement matrix");
  std::string cmp_config;
  int cmp_jobs = 1;
  cmp->add_option("--config", cmp_config, "config file")->required();
  cmp->add_option("--jobs", cmp_jobs, "worker threads");

  // interleave
  auto* ilv = app.add_subcommand("interleave",
                                 "digit-interleave vectors (stdin/stdout)");
  bool ilv_encode = false;
  bool ilv_decode = false;
  std::string ilv_digits = "3.6";
  double ilv_offset = 0.0;
  int ilv_k = 1;
  ilv->add_flag("--encode", ilv_encode, "encode comma-separated reals");
  ilv->add_flag("--decode", ilv_decode, "decode interleaved strings");
  ilv->add_option("--digits", ilv_digits, "P.Q fixed-point digits");
  ilv->add_option("--offset", ilv_offset, "positivity offset");
  ilv->add_option("--k", ilv_k, "vector length (decode)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      return cmd_simulate(sim_config, sim_seed, seed_opt->count() > 0,
                          sim_out, sim_format, sim_jobs);
    }
    if (*rec) return cmd_reconstruct(rec_matrix, rec_dim, rec_method, rec_out);
    if (*cmp) return cmd_compare(cmp_config, cmp_jobs);
    if (*ilv) {
      if (ilv_encode == ilv_decode) {
        throw viewrec::ConfigError(
            "interleave: pass exactly one of --encode/--decode");
      }
      return cmd_interleave(ilv_encode, ilv_digits, ilv_offset, ilv_k);
    }
  } catch (const viewrec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const viewrec::DegenerateInput& e) {
    std::cerr << "degenerate input: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const viewrec::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const viewrec::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
