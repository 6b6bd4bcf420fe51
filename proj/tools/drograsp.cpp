// drograsp: sampling, distance matrices, grasp recovery and benchmarks.

#include "drg/error.hpp"
#include "drg/formats.hpp"
#include "drg/pipeline.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitData = 3;
constexpr int kExitTolerance = 4;

drg::JointConfig parse_q(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw drg::ContractError("cannot parse joint value '" + tok + "'");
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// --q takes precedence; otherwise line `index` of a GraspRecord JSONL file.
std::optional<drg::JointConfig> resolve_q(const std::string& q, const std::string& grasp_file, int index) {
  if (!q.empty()) return parse_q(q);
  if (grasp_file.empty()) return std::nullopt;
  const auto records = drg::parse_grasp_records(drg::read_text(grasp_file));
  if (index < 0 || index >= static_cast<int>(records.size())) {
    throw drg::ContractError("grasp index " + std::to_string(index) + " out of range (" +
                             std::to_string(records.size()) + " records)");
  }
  return records[static_cast<std::size_t>(index)].q;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance-matrix grasp representation tools"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string model_path, mesh_dir, object_path;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--output", output_dir, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every stochastic stage");
  app.add_option("--threads", threads, "Worker threads (DRO_THREADS overrides)")->check(CLI::NonNegativeNumber);
  app.add_option("--model", model_path, "URDF file");
  app.add_option("--mesh-dir", mesh_dir, "Directory for URDF mesh files");
  app.add_option("--object", object_path, "Object mesh (OBJ)");

  auto* sample = app.add_subcommand("sample", "Sample canonical robot and object clouds");

  auto* dro = app.add_subcommand("compute-dro", "Distance matrix of a posed robot cloud");
  std::string robot_file, object_file, q_text, grasp_file;
  int grasp_index = 0;
  bool f32 = false;
  dro->add_option("--robot", robot_file, "Labeled robot DROPC")->required();
  dro->add_option("--object-cloud", object_file, "Object DROPC")->required();
  dro->add_option("--q", q_text, "Comma-separated joint values");
  dro->add_option("--grasp", grasp_file, "GraspRecord JSONL file");
  dro->add_option("--index", grasp_index, "Record index in --grasp");
  dro->add_flag("--f32", f32, "Store the matrix as f32");

  auto* recover = app.add_subcommand("recover", "Recover joint values from a distance matrix");
  std::string dro_file, q_init_text;
  bool emit_cloud = false;
  recover->add_option("--dro", dro_file, "DROMX matrix")->required();
  recover->add_option("--object-cloud", object_file, "Object DROPC")->required();
  recover->add_option("--robot", robot_file, "Labeled canonical robot DROPC")->required();
  recover->add_option("--q-init", q_init_text, "Comma-separated initial joint values");
  recover->add_flag("--emit-cloud", emit_cloud, "Also write the recovered labeled cloud");

  auto* roundtrip = app.add_subcommand("roundtrip", "Random grasps through the full recovery pipeline");
  int n_trials = 50;
  drg::Tolerances tol;
  roundtrip->add_option("--trials", n_trials, "Number of random grasps");
  roundtrip->add_option("--tol-mean", tol.mean_link, "Mean link error tolerance (m)");
  roundtrip->add_option("--tol-max", tol.max_link, "Max link error tolerance (m)");

  auto* bench = app.add_subcommand("bench", "Per-stage timing of the geometric pipeline");
  drg::BenchOptions bench_opts;
  int n_object = 0;
  bench->add_option("--runs", bench_opts.runs, "Timed runs");
  bench->add_option("--warmup", bench_opts.warmup, "Untimed warmup runs");
  bench->add_option("--n-object", n_object, "Override the object point count");

  auto* losses = app.add_subcommand("losses", "Evaluate losses on stored arrays");
  drg::LossInputs loss_in;
  std::string s;
  losses->add_option("--dro-pred", s)->each([&](const std::string& v) { loss_in.dro_pred = v; });
  losses->add_option("--dro-gt", s)->each([&](const std::string& v) { loss_in.dro_gt = v; });
  losses->add_option("--features-a", s, "DROMX feature rows")->each([&](const std::string& v) { loss_in.features_a = v; });
  losses->add_option("--features-b", s, "DROMX feature rows")->each([&](const std::string& v) { loss_in.features_b = v; });
  losses->add_option("--points-b", s, "DROPC points for --features-b")->each([&](const std::string& v) {
    loss_in.points_b = v;
  });
  losses->add_option("--tau", loss_in.contrastive.tau);
  losses->add_option("--lambda", loss_in.contrastive.lambda);
  losses->add_flag("--per-row-max", loss_in.contrastive.per_row_max);
  losses->add_option("--pose-pred", s, "LinkPoseSet JSON")->each([&](const std::string& v) { loss_in.pose_pred = v; });
  losses->add_option("--pose-gt", s, "LinkPoseSet JSON")->each([&](const std::string& v) { loss_in.pose_gt = v; });
  losses->add_option("--robot-cloud", s, "DROPC")->each([&](const std::string& v) { loss_in.robot_cloud = v; });
  losses->add_option("--object-mesh", s, "Closed OBJ mesh")->each([&](const std::string& v) { loss_in.object_mesh = v; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  if (const char* env = std::getenv("DRO_THREADS")) {
    try {
      threads = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "error: DRO_THREADS='" << env << "' is not an integer\n";
      return kExitValidation;
    }
    if (threads < 0) {
      std::cerr << "error: DRO_THREADS must be nonnegative\n";
      return kExitValidation;
    }
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    drg::RunConfig cfg;
    if (!config_path.empty()) cfg = drg::config_from_json(drg::read_text(config_path));
    if (*seed_opt) cfg.seed = seed;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!model_path.empty()) cfg.model_path = model_path;
    if (!mesh_dir.empty()) cfg.mesh_dir = mesh_dir;
    if (!object_path.empty()) cfg.object_path = object_path;
    cfg.sampling.seed = cfg.seed;

    if (*sample) {
      drg::cmd_sample(cfg);
    } else if (*dro) {
      const auto q = resolve_q(q_text, grasp_file, grasp_index);
      if (!q) throw drg::ContractError("compute-dro needs --q or --grasp");
      drg::cmd_compute_dro(cfg, robot_file, object_file, *q, f32 ? drg::DType::f32 : drg::DType::f64);
    } else if (*recover) {
      drg::RecoverOptions opts;
      if (!q_init_text.empty()) opts.q_init = parse_q(q_init_text);
      opts.emit_cloud = emit_cloud;
      const auto result = drg::cmd_recover(cfg, dro_file, object_file, robot_file, opts);
      std::cout << drg::grasp_result_to_json(result) << "\n";
    } else if (*roundtrip) {
      const auto summary = drg::cmd_roundtrip(cfg, n_trials, tol);
      std::cout << summary.json.dump(2) << "\n";
      if (!summary.passed) {
        std::cerr << "error: round-trip errors exceed tolerance\n";
        return kExitTolerance;
      }
    } else if (*bench) {
      if (n_object > 0) cfg.sampling.n_object = n_object;
      std::cout << drg::cmd_bench(cfg, bench_opts).dump(2) << "\n";
    } else if (*losses) {
      std::cout << drg::cmd_losses(cfg, loss_in).dump(2) << "\n";
    }
  } catch (const drg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
