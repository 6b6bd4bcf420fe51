#include "drg/pipeline.hpp"

#include "drg/distance_matrix.hpp"
#include "drg/error.hpp"
#include "drg/losses.hpp"
#include "drg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace drg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ContractError(std::string(what) + " is not set");
  if (!fs::exists(p)) throw ContractError(std::string(what) + " '" + p.string() + "' does not exist");
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ojson file_entry(const fs::path& p) {
  ojson e;
  e["path"] = p.string();
  e["hash"] = content_hash(read_bytes(p));
  return e;
}

void write_json(const fs::path& p, const ojson& j) { write_text(p, j.dump(2) + "\n"); }

fs::path prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw DataError("cannot create output directory '" + cfg.output_dir.string() + "': " + ec.message());
  return cfg.output_dir;
}

ojson stage_stats(const std::vector<StageTimes>& times) {
  const auto stats = [&](auto get) {
    std::vector<double> v;
    v.reserve(times.size());
    for (const auto& t : times) v.push_back(get(t));
    ojson e;
    e["median_s"] = median(v);
    e["p95_s"] = percentile_nearest_rank(v, 0.95);
    return e;
  };
  ojson j;
  j["multilateration"] = stats([](const StageTimes& t) { return t.multilateration; });
  j["registration"] = stats([](const StageTimes& t) { return t.registration; });
  j["optimization"] = stats([](const StageTimes& t) { return t.optimization; });
  j["total"] = stats([](const StageTimes& t) { return t.total(); });
  return j;
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ContractError("unknown config key '" + where + key + "'");
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  sampling.validate();
  solve.validate();
  if (!model_path.empty()) require_file(model_path, "model_path");
  if (!mesh_dir.empty()) require_file(mesh_dir, "mesh_dir");
  if (!object_path.empty()) require_file(object_path, "object_path");
  if (!(model_options.virtual_tip_extension_length > 0.0)) throw ContractError("tip extension length must be positive");
  if (!(model_options.tip_extension_axis.norm() > 0.0)) throw ContractError("tip extension axis must be nonzero");
}

SamplingConfig RunConfig::seeded_sampling() const {
  SamplingConfig s = sampling;
  s.seed = seed;
  return s;
}

RunConfig config_from_json(const std::string& text) {
  RunConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("config must be a JSON object");
  try {
    reject_unknown(j, {"model_path", "mesh_dir", "object_path", "seed", "output_dir", "sampling", "solve", "model"}, "");
    if (j.contains("model_path")) cfg.model_path = j["model_path"].get<std::string>();
    if (j.contains("mesh_dir")) cfg.mesh_dir = j["mesh_dir"].get<std::string>();
    if (j.contains("object_path")) cfg.object_path = j["object_path"].get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    take(j, "seed", cfg.seed);
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      reject_unknown(s,
                     {"n_per_link", "n_total", "n_object", "object_noise_sigma", "object_pool", "min_points_per_link"},
                     "sampling.");
      take(s, "n_per_link", cfg.sampling.n_per_link);
      take(s, "n_total", cfg.sampling.n_total);
      take(s, "n_object", cfg.sampling.n_object);
      take(s, "object_noise_sigma", cfg.sampling.object_noise_sigma);
      take(s, "object_pool", cfg.sampling.object_pool);
      take(s, "min_points_per_link", cfg.sampling.min_points_per_link);
    }
    if (j.contains("solve")) {
      const auto& s = j["solve"];
      reject_unknown(s, {"step_bound", "max_iters", "tol_step", "tol_residual", "damping"}, "solve.");
      take(s, "step_bound", cfg.solve.step_bound);
      take(s, "max_iters", cfg.solve.max_iters);
      take(s, "tol_step", cfg.solve.tol_step);
      take(s, "tol_residual", cfg.solve.tol_residual);
      take(s, "damping", cfg.solve.damping);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      reject_unknown(m, {"tip_extension_length", "tip_extension_axis"}, "model.");
      take(m, "tip_extension_length", cfg.model_options.virtual_tip_extension_length);
      if (m.contains("tip_extension_axis")) {
        const auto a = m["tip_extension_axis"].get<std::vector<double>>();
        if (a.size() != 3) throw ContractError("model.tip_extension_axis needs 3 values");
        cfg.model_options.tip_extension_axis = Vec3(a[0], a[1], a[2]);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("bad config value: ") + e.what());
  }
  cfg.sampling.seed = cfg.seed;
  return cfg;
}

ojson config_to_json(const RunConfig& cfg) {
  ojson j;
  j["model_path"] = cfg.model_path.string();
  j["mesh_dir"] = cfg.mesh_dir.string();
  j["object_path"] = cfg.object_path.string();
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  j["sampling"] = {{"n_per_link", cfg.sampling.n_per_link},
                   {"n_total", cfg.sampling.n_total},
                   {"n_object", cfg.sampling.n_object},
                   {"object_noise_sigma", cfg.sampling.object_noise_sigma},
                   {"object_pool", cfg.sampling.object_pool},
                   {"min_points_per_link", cfg.sampling.min_points_per_link}};
  j["solve"] = {{"step_bound", cfg.solve.step_bound},
                {"max_iters", cfg.solve.max_iters},
                {"tol_step", cfg.solve.tol_step},
                {"tol_residual", cfg.solve.tol_residual},
                {"damping", cfg.solve.damping}};
  const Vec3& a = cfg.model_options.tip_extension_axis;
  j["model"] = {{"tip_extension_length", cfg.model_options.virtual_tip_extension_length},
                {"tip_extension_axis", {a.x(), a.y(), a.z()}}};
  return j;
}

KinematicModel load_model_file(const fs::path& path, const ModelOptions& options) {
  const std::string text = read_text(path);
  try {
    return load_model(text, options);
  } catch (const ParseError& e) {
    std::string msg = e.what();
    const std::string prefix = "line " + std::to_string(e.line()) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw ParseError(path.string() + ": " + msg, e.line());
  } catch (const StructuralError& e) {
    throw StructuralError(path.string() + ": " + e.what());
  }
}

TriangleMesh load_object_mesh(const RunConfig& cfg) {
  if (cfg.object_path.empty()) return make_icosphere(0.05, 3);
  return load_obj(cfg.object_path);
}

LinkClouds sample_canonical(const KinematicModel& model, const RunConfig& cfg) {
  const fs::path mesh_dir = cfg.mesh_dir.empty() ? cfg.model_path.parent_path() : cfg.mesh_dir;
  return sample_link_clouds(model, link_meshes(model, mesh_dir), cfg.seeded_sampling());
}

JointConfig random_config(const KinematicModel& model, std::uint64_t seed, double wrist_box) {
  Rng rng(seed, "random_config");
  JointConfig q(model.n_dof());
  for (int i = 0; i < model.n_dof(); ++i) {
    double lo = model.lower_limits()[i];
    double hi = model.upper_limits()[i];
    if (i < 3) {
      lo = std::max(lo, -wrist_box);
      hi = std::min(hi, wrist_box);
    }
    q[i] = rng.uniform(lo, hi);
  }
  return q;
}

ojson cmd_sample(const RunConfig& cfg) {
  cfg.validate();
  require_file(cfg.model_path, "model_path");
  const KinematicModel model = load_model_file(cfg.model_path, cfg.model_options);
  const LinkClouds canonical = sample_canonical(model, cfg);
  const fs::path out = prepare_output(cfg);

  ojson manifest;
  manifest["command"] = "sample";
  manifest["seed"] = cfg.seed;
  manifest["config"] = config_to_json(cfg);
  manifest["inputs"]["model"] = file_entry(cfg.model_path);
  if (!cfg.object_path.empty()) manifest["inputs"]["object"] = file_entry(cfg.object_path);

  write_dropc(out / "robot.dropc", to_point_cloud(model, canonical));
  ojson robot = file_entry(out / "robot.dropc");
  robot["points"] = canonical.total_points();
  ojson per_link = ojson::object();
  for (int i = 0; i < model.n_links(); ++i) {
    const auto n = canonical.per_link[static_cast<std::size_t>(i)].rows();
    if (n > 0) per_link[model.link(i).name] = n;
  }
  robot["per_link"] = per_link;
  manifest["outputs"]["robot"] = robot;

  if (!cfg.object_path.empty()) {
    const PointCloud object = sample_object_cloud(load_object_mesh(cfg), cfg.seeded_sampling());
    write_dropc(out / "object.dropc", object);
    ojson o = file_entry(out / "object.dropc");
    o["points"] = object.size();
    manifest["outputs"]["object"] = o;
  }
  write_json(out / "sample_manifest.json", manifest);
  return manifest;
}

ojson cmd_compute_dro(const RunConfig& cfg, const fs::path& robot_file, const fs::path& object_file,
                      const JointConfig& q, DType dtype) {
  cfg.validate();
  require_file(cfg.model_path, "model_path");
  require_file(robot_file, "robot cloud");
  require_file(object_file, "object cloud");
  const KinematicModel model = load_model_file(cfg.model_path, cfg.model_options);
  if (q.size() != model.n_dof()) {
    throw ContractError("q has " + std::to_string(q.size()) + " entries, model has " + std::to_string(model.n_dof()));
  }
  if (!q.allFinite()) throw ContractError("q has non-finite entries");
  const LinkClouds canonical = from_point_cloud(model, read_dropc(robot_file));
  const PointCloud object = read_dropc(object_file);
  const PointCloud posed = cloud_fk(model, q, canonical);
  const DroMatrix dro = compute_dro(posed.points, object.points);

  const fs::path out = prepare_output(cfg);
  write_dromx(out / "dro.dromx", dro, dtype);

  ojson manifest;
  manifest["command"] = "compute-dro";
  manifest["seed"] = cfg.seed;
  manifest["config"] = config_to_json(cfg);
  manifest["q"] = to_vec(q);
  manifest["inputs"]["model"] = file_entry(cfg.model_path);
  manifest["inputs"]["robot"] = file_entry(robot_file);
  manifest["inputs"]["object"] = file_entry(object_file);
  ojson d = file_entry(out / "dro.dromx");
  d["rows"] = dro.rows();
  d["cols"] = dro.cols();
  d["dtype"] = dtype == DType::f64 ? "f64" : "f32";
  manifest["outputs"]["dro"] = d;
  write_json(out / "dro_manifest.json", manifest);
  return manifest;
}

GraspResult cmd_recover(const RunConfig& cfg, const fs::path& dro_file, const fs::path& object_file,
                        const fs::path& robot_file, const RecoverOptions& options) {
  cfg.validate();
  require_file(cfg.model_path, "model_path");
  require_file(dro_file, "matrix file");
  require_file(object_file, "object cloud");
  require_file(robot_file, "robot cloud");
  const KinematicModel model = load_model_file(cfg.model_path, cfg.model_options);
  const DroMatrix dro = read_dromx(dro_file);
  const PointCloud object = read_dropc(object_file);
  const LinkClouds canonical = from_point_cloud(model, read_dropc(robot_file));
  if (options.q_init && options.q_init->size() != model.n_dof()) {
    throw ContractError("q_init has " + std::to_string(options.q_init->size()) + " entries, model has " +
                        std::to_string(model.n_dof()));
  }

  GraspResult result = options.q_init ? recover_grasp(model, canonical, dro, object.points, *options.q_init, cfg.solve)
                                      : recover_grasp(model, canonical, dro, object.points, cfg.solve);

  const fs::path out = prepare_output(cfg);
  write_text(out / "result.json", grasp_result_to_json(result) + "\n");
  write_text(out / "link_poses.json",
             link_poses_to_json(model, result.link_poses.poses, result.link_poses.valid) + "\n");
  ojson manifest;
  manifest["command"] = "recover";
  manifest["seed"] = cfg.seed;
  manifest["config"] = config_to_json(cfg);
  if (options.q_init) manifest["q_init"] = to_vec(*options.q_init);
  manifest["inputs"]["model"] = file_entry(cfg.model_path);
  manifest["inputs"]["dro"] = file_entry(dro_file);
  manifest["inputs"]["object"] = file_entry(object_file);
  manifest["inputs"]["robot"] = file_entry(robot_file);
  manifest["outputs"]["result"] = file_entry(out / "result.json");
  manifest["outputs"]["link_poses"] = file_entry(out / "link_poses.json");
  if (options.emit_cloud) {
    write_dropc(out / "recovered.dropc", result.recovered_cloud);
    manifest["outputs"]["recovered_cloud"] = file_entry(out / "recovered.dropc");
  }
  write_json(out / "recover_manifest.json", manifest);
  return result;
}

RoundtripSummary cmd_roundtrip(const RunConfig& cfg, int n_trials, const Tolerances& tol) {
  cfg.validate();
  if (n_trials < 0) throw ContractError("n_trials must be nonnegative");
  require_file(cfg.model_path, "model_path");
  const fs::path out = prepare_output(cfg);

  RoundtripSummary summary;
  ojson& j = summary.json;
  j["command"] = "roundtrip";
  j["seed"] = cfg.seed;
  j["n_trials"] = n_trials;
  j["tolerances"] = {{"mean_link_error", tol.mean_link}, {"max_link_error", tol.max_link}};
  if (n_trials == 0) {
    j["passed"] = true;
    write_json(out / "roundtrip.json", j);
    return summary;
  }

  const KinematicModel model = load_model_file(cfg.model_path, cfg.model_options);
  const LinkClouds canonical = sample_canonical(model, cfg);
  const Points object = sample_object_cloud(load_object_mesh(cfg), cfg.seeded_sampling()).points;
  const std::vector<int> links = model.target_links();

  struct Trial {
    double mean_link = 0.0;
    double max_link = 0.0;
    double mean_joint = 0.0;
    bool converged = false;
    int iterations = 0;
    StageTimes times;
    std::exception_ptr error;
  };
  std::vector<Trial> trials(static_cast<std::size_t>(n_trials));

#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < n_trials; ++t) {
    Trial& tr = trials[static_cast<std::size_t>(t)];
    try {
      const JointConfig q_star = random_config(model, stream_seed(cfg.seed, "roundtrip/" + std::to_string(t)));
      const DroMatrix dro = compute_dro(cloud_fk(model, q_star, canonical).points, object);
      JointConfig q_init = mid_range_config(model);
      q_init.head<KinematicModel::kWristDofs>() = q_star.head<KinematicModel::kWristDofs>();
      const GraspResult res = recover_grasp(model, canonical, dro, object, q_init, cfg.solve);

      const LinkPoseSet truth = forward_kinematics(model, q_star);
      const LinkPoseSet got = forward_kinematics(model, res.q);
      double sum = 0.0;
      for (int li : links) {
        const double e =
            (truth[static_cast<std::size_t>(li)].translation() - got[static_cast<std::size_t>(li)].translation()).norm();
        sum += e;
        tr.max_link = std::max(tr.max_link, e);
      }
      tr.mean_link = sum / static_cast<double>(links.size());
      const int n_act = model.n_dof() - KinematicModel::kWristDofs;
      if (n_act > 0) {
        tr.mean_joint = (res.q - q_star).tail(n_act).cwiseAbs().mean();
      }
      tr.converged = res.report.converged;
      tr.iterations = res.report.iterations;
      tr.times = res.elapsed;
    } catch (...) {
      tr.error = std::current_exception();
    }
  }
  for (const auto& tr : trials) {
    if (tr.error) std::rethrow_exception(tr.error);
  }

  double mean_link = 0.0, max_link = 0.0, mean_joint = 0.0;
  int converged = 0;
  std::vector<double> per_trial;
  std::vector<StageTimes> times;
  for (const auto& tr : trials) {
    mean_link += tr.mean_link;
    max_link = std::max(max_link, tr.max_link);
    mean_joint += tr.mean_joint;
    converged += tr.converged ? 1 : 0;
    per_trial.push_back(tr.mean_link);
    times.push_back(tr.times);
  }
  mean_link /= n_trials;
  mean_joint /= n_trials;
  summary.passed = mean_link < tol.mean_link && max_link < tol.max_link;

  j["model"] = model.name();
  j["n_dof"] = model.n_dof();
  j["mean_link_error"] = mean_link;
  j["max_link_error"] = max_link;
  j["mean_joint_error"] = mean_joint;
  j["converged_trials"] = converged;
  j["per_trial_mean_link_error"] = per_trial;
  j["passed"] = summary.passed;
  j["timings"] = stage_stats(times);
  write_json(out / "roundtrip.json", j);
  return summary;
}

ojson cmd_bench(const RunConfig& cfg, const BenchOptions& options) {
  cfg.validate();
  if (options.runs < 1 || options.warmup < 0) throw ContractError("bench needs runs >= 1 and warmup >= 0");
  require_file(cfg.model_path, "model_path");
  const KinematicModel model = load_model_file(cfg.model_path, cfg.model_options);
  const LinkClouds canonical = sample_canonical(model, cfg);
  const Points object = sample_object_cloud(load_object_mesh(cfg), cfg.seeded_sampling()).points;
  const JointConfig q_star = random_config(model, stream_seed(cfg.seed, "bench"));
  const DroMatrix dro = compute_dro(cloud_fk(model, q_star, canonical).points, object);

  std::vector<StageTimes> times;
  for (int r = 0; r < options.warmup + options.runs; ++r) {
    const GraspResult res = recover_grasp(model, canonical, dro, object, cfg.solve);
    if (r >= options.warmup) times.push_back(res.elapsed);
  }
  const ojson j = stage_stats(times);
  write_json(prepare_output(cfg) / "bench.json", j);
  return j;
}

ojson cmd_losses(const RunConfig& cfg, const LossInputs& in) {
  ojson j = ojson::object();
  if (!in.dro_pred.empty() || !in.dro_gt.empty()) {
    require_file(in.dro_pred, "dro_pred");
    require_file(in.dro_gt, "dro_gt");
    j["dro_l1"] = dro_l1_loss(read_dromx(in.dro_pred), read_dromx(in.dro_gt));
  }
  if (!in.features_a.empty() || !in.features_b.empty() || !in.points_b.empty()) {
    require_file(in.features_a, "features_a");
    require_file(in.features_b, "features_b");
    require_file(in.points_b, "points_b");
    j["contrastive"] =
        contrastive_loss(read_dromx(in.features_a), read_dromx(in.features_b), read_dropc(in.points_b).points,
                         in.contrastive);
  }
  if (!in.pose_pred.empty() || !in.pose_gt.empty()) {
    require_file(in.pose_pred, "pose_pred");
    require_file(in.pose_gt, "pose_gt");
    const auto pred = link_poses_from_json(read_text(in.pose_pred));
    const auto gt = link_poses_from_json(read_text(in.pose_gt));
    double sum = 0.0;
    int n = 0;
    for (const auto& [name, pose] : pred) {
      const auto it = gt.find(name);
      if (it == gt.end()) continue;
      sum += pose_loss(pose, it->second);
      ++n;
    }
    if (n == 0) throw ContractError("pose files share no link names");
    j["pose"] = sum / n;
  }
  if (!in.robot_cloud.empty() || !in.object_mesh.empty()) {
    require_file(in.robot_cloud, "robot_cloud");
    require_file(in.object_mesh, "object_mesh");
    j["penetration"] = penetration_loss(read_dropc(in.robot_cloud).points, load_obj(in.object_mesh));
  }
  if (j.empty()) throw ContractError("no loss inputs given");
  write_json(prepare_output(cfg) / "losses.json", j);
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile_nearest_rank(std::vector<double> v, double p) {
  if (v.empty()) throw ContractError("percentile of an empty sample");
  if (!(p > 0.0 && p <= 1.0)) throw ContractError("percentile must lie in (0, 1]");
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace drg
