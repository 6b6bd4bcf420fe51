#pragma once

#include "drg/cloud.hpp"
#include "drg/formats.hpp"
#include "drg/kinematics.hpp"
#include "drg/losses.hpp"
#include "drg/optimizer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drg {

struct RunConfig {
  std::filesystem::path model_path;
  /// Mesh files named in the URDF are resolved here; defaults to the URDF's directory.
  std::filesystem::path mesh_dir;
  /// Object mesh (OBJ). Empty means the built-in 5 cm sphere.
  std::filesystem::path object_path;
  SamplingConfig sampling;
  SolveParams solve;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";
  ModelOptions model_options;

  /// Checks parameters and that referenced paths exist (ContractError).
  void validate() const;
  /// Sampling config with the run seed applied.
  SamplingConfig seeded_sampling() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const std::string& text);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

KinematicModel load_model_file(const std::filesystem::path& path, const ModelOptions& options = {});
TriangleMesh load_object_mesh(const RunConfig& cfg);
/// Canonical link clouds sampled from the model geometry.
LinkClouds sample_canonical(const KinematicModel& model, const RunConfig& cfg);

/// Uniform configuration inside the limits, with the wrist translation
/// restricted to +-wrist_box meters.
JointConfig random_config(const KinematicModel& model, std::uint64_t seed, double wrist_box = 0.15);

/// Writes robot.dropc (labeled canonical clouds), object.dropc when an
/// object is configured, and sample_manifest.json. Returns the manifest.
nlohmann::ordered_json cmd_sample(const RunConfig& cfg);

/// Poses the robot cloud at q and writes dro.dromx plus dro_manifest.json.
nlohmann::ordered_json cmd_compute_dro(const RunConfig& cfg, const std::filesystem::path& robot_file,
                                       const std::filesystem::path& object_file, const JointConfig& q,
                                       DType dtype = DType::f64);

struct RecoverOptions {
  std::optional<JointConfig> q_init;
  bool emit_cloud = false;
};

/// Writes result.json, link_poses.json, recover_manifest.json and, with
/// emit_cloud, recovered.dropc.
GraspResult cmd_recover(const RunConfig& cfg, const std::filesystem::path& dro_file,
                        const std::filesystem::path& object_file, const std::filesystem::path& robot_file,
                        const RecoverOptions& options = {});

struct Tolerances {
  double mean_link = 1e-3;
  double max_link = 5e-3;
};

struct RoundtripSummary {
  nlohmann::ordered_json json;
  bool passed = true;
};

/// Random grasps -> ground-truth matrices -> recovery. Writes roundtrip.json.
RoundtripSummary cmd_roundtrip(const RunConfig& cfg, int n_trials, const Tolerances& tol = {});

struct BenchOptions {
  int runs = 20;
  int warmup = 3;
};

/// Median and p95 per-stage wall time of recover_grasp on one fixed grasp.
/// Writes bench.json; only geometric stages are timed.
nlohmann::ordered_json cmd_bench(const RunConfig& cfg, const BenchOptions& options = {});

struct LossInputs {
  std::filesystem::path dro_pred, dro_gt;                    // dro_l1
  std::filesystem::path features_a, features_b, points_b;    // contrastive
  ContrastiveParams contrastive;
  std::filesystem::path pose_pred, pose_gt;                  // pose (mean over shared links)
  std::filesystem::path robot_cloud, object_mesh;            // penetration
};

/// Evaluates every loss whose inputs are given; writes losses.json.
nlohmann::ordered_json cmd_losses(const RunConfig& cfg, const LossInputs& inputs);

/// p-quantile by nearest rank of an unsorted sample (median averages the
/// two middle values).
double median(std::vector<double> v);
double percentile_nearest_rank(std::vector<double> v, double p);

}  // namespace drg
