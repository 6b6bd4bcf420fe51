#pragma once

#include "drg/kinematics.hpp"
#include "drg/mesh.hpp"
#include "drg/points.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace drg {

/// Point set with optional per-point labels. `labels[i]` indexes
/// `label_names`; robot clouds use the model's link order for both.
struct PointCloud {
  Points points;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> label_names;

  Eigen::Index size() const { return points.rows(); }
  bool labeled() const { return !labels.empty(); }
};

struct SamplingConfig {
  int n_per_link = 512;
  int n_total = 512;
  int n_object = 512;
  double object_noise_sigma = 0.002;
  int object_pool = 65536;
  std::uint64_t seed = 0;
  /// Points reserved for every link with geometry before the global FPS pass,
  /// so registration always has a solvable point set.
  int min_points_per_link = 4;

  void validate() const;
};

/// Canonical (zero-pose, link-frame) points per model link. Links without
/// geometry hold an empty array.
struct LinkClouds {
  std::vector<Points> per_link;

  Eigen::Index total_points() const;
};

/// Build the per-link surface mesh from URDF geometry. Primitives are
/// tessellated; mesh files are resolved against `mesh_dir` (OBJ only).
/// Links without geometry get an empty mesh.
std::vector<TriangleMesh> link_meshes(const KinematicModel& model, const std::filesystem::path& mesh_dir);

/// Area-weighted uniform surface samples.
Points sample_surface(const TriangleMesh& mesh, Eigen::Index n, std::uint64_t seed);

/// Greedy max-min subsampling. The start index is drawn from `seed`; ties go
/// to the lowest index.
std::vector<Eigen::Index> farthest_point_sampling(const Points& points, Eigen::Index k, std::uint64_t seed);
/// Continue FPS from an already-selected set (kept first, in order).
std::vector<Eigen::Index> farthest_point_sampling(const Points& points, Eigen::Index k,
                                                  const std::vector<Eigen::Index>& initial);

namespace reference {
/// Single-threaded FPS kept as a baseline for the OpenMP kernel.
std::vector<Eigen::Index> farthest_point_sampling(const Points& points, Eigen::Index k,
                                                  const std::vector<Eigen::Index>& initial);
}  // namespace reference

/// Sample n_per_link points on every link, then FPS down to n_total over the
/// union. Deterministic in cfg.seed.
LinkClouds sample_link_clouds(const KinematicModel& model, const std::vector<TriangleMesh>& meshes,
                              const SamplingConfig& cfg);

/// Labeled robot cloud of the canonical points, concatenated in link order.
PointCloud to_point_cloud(const KinematicModel& model, const LinkClouds& clouds);
/// Inverse of to_point_cloud; labels are matched by link name.
LinkClouds from_point_cloud(const KinematicModel& model, const PointCloud& cloud);

/// Point-cloud forward kinematics: every canonical point moved by its link's
/// world pose. Point i always refers to the same material point.
PointCloud cloud_fk(const KinematicModel& model, const JointConfig& q, const LinkClouds& canonical);
PointCloud cloud_fk(const KinematicModel& model, const LinkPoseSet& poses, const LinkClouds& canonical);

/// Pool of cfg.object_pool surface samples, cfg.n_object picked without
/// replacement, isotropic Gaussian noise of cfg.object_noise_sigma.
PointCloud sample_object_cloud(const TriangleMesh& mesh, const SamplingConfig& cfg);

/// Keep the half of the points facing a random view direction. The direction
/// r points from a random unit-sphere sample to the origin; each point scores
/// r . d_i with d_i the unit vector from the centroid. Output keeps input order.
Points partial_cloud(const Points& points, std::uint64_t seed);
Points partial_cloud(const Points& points, const Vec3& view_direction);

Vec3 centroid(const Points& points);

}  // namespace drg
