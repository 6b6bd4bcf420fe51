#include "drg/cloud.hpp"

#include "drg/error.hpp"
#include "drg/rng.hpp"

#include <omp.h>

#include <algorithm>
#include <limits>
#include <numeric>

namespace drg {

void SamplingConfig::validate() const {
  if (n_per_link <= 0 || n_total <= 0 || n_object <= 0 || object_pool <= 0) {
    throw ContractError("sampling counts must be positive");
  }
  if (!(object_noise_sigma >= 0.0)) throw ContractError("object noise sigma must be nonnegative");
  if (n_object > object_pool) {
    throw ContractError("n_object (" + std::to_string(n_object) + ") exceeds object_pool (" +
                        std::to_string(object_pool) + ")");
  }
  if (min_points_per_link < 0 || min_points_per_link > n_per_link) {
    throw ContractError("min_points_per_link must lie in [0, n_per_link]");
  }
}

Eigen::Index LinkClouds::total_points() const {
  Eigen::Index n = 0;
  for (const auto& p : per_link) n += p.rows();
  return n;
}

Vec3 centroid(const Points& points) {
  if (points.rows() == 0) return Vec3::Zero();
  return points.colwise().mean().transpose();
}

std::vector<TriangleMesh> link_meshes(const KinematicModel& model, const std::filesystem::path& mesh_dir) {
  std::vector<TriangleMesh> meshes(static_cast<std::size_t>(model.n_links()));
  for (int i = 0; i < model.n_links(); ++i) {
    TriangleMesh combined;
    for (const Geometry& g : model.link(i).visuals) {
      TriangleMesh m;
      switch (g.shape) {
        case Geometry::Shape::box: m = make_box(g.size); break;
        case Geometry::Shape::cylinder: m = make_cylinder(g.radius, g.length); break;
        case Geometry::Shape::sphere: m = make_icosphere(g.radius, 2); break;
        case Geometry::Shape::mesh: {
          std::string file = g.filename;
          if (const auto pos = file.find("://"); pos != std::string::npos) file = file.substr(pos + 3);
          std::filesystem::path path = mesh_dir / file;
          if (!std::filesystem::exists(path)) path = mesh_dir / std::filesystem::path(file).filename();
          if (!std::filesystem::exists(path)) {
            throw DataError("mesh file '" + (mesh_dir / file).string() + "' for link '" + model.link(i).name +
                            "' not found");
          }
          if (path.extension() != ".obj" && path.extension() != ".OBJ") {
            throw DataError("mesh file '" + path.string() + "' is not OBJ");
          }
          m = load_obj(path);
          for (Eigen::Index r = 0; r < m.vertices.rows(); ++r) {
            m.vertices.row(r) = m.vertices.row(r).cwiseProduct(g.scale.transpose());
          }
          break;
        }
      }
      append(combined, transformed(m, g.origin));
    }
    meshes[static_cast<std::size_t>(i)] = std::move(combined);
  }
  return meshes;
}

Points sample_surface(const TriangleMesh& mesh, Eigen::Index n, std::uint64_t seed) {
  if (mesh.empty()) throw DataError("cannot sample an empty mesh");
  std::vector<double> cumulative(static_cast<std::size_t>(mesh.n_triangles()));
  double total = 0.0;
  for (Eigen::Index t = 0; t < mesh.n_triangles(); ++t) {
    total += triangle_area(mesh.vertex(t, 0), mesh.vertex(t, 1), mesh.vertex(t, 2));
    cumulative[static_cast<std::size_t>(t)] = total;
  }
  if (!(total > 0.0)) throw DataError("mesh has zero surface area");
  Rng rng(seed);
  Points out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto t = static_cast<Eigen::Index>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    // Uniform barycentric sample (square-root warp).
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 p = (1.0 - r1) * mesh.vertex(t, 0) + r1 * (1.0 - r2) * mesh.vertex(t, 1) + r1 * r2 * mesh.vertex(t, 2);
    out.row(i) = p.transpose();
  }
  return out;
}

namespace {

void check_fps_args(const Points& points, Eigen::Index k, const std::vector<Eigen::Index>& initial) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) {
    throw ContractError("FPS count " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  if (static_cast<Eigen::Index>(initial.size()) > k) throw ContractError("FPS initial set larger than k");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Eigen::Index i : initial) {
    if (i < 0 || i >= n) throw ContractError("FPS initial index out of range");
    if (seen[static_cast<std::size_t>(i)]) throw ContractError("FPS initial set has duplicates");
    seen[static_cast<std::size_t>(i)] = true;
  }
}

struct Farthest {
  double dist;
  Eigen::Index index;
};

// Larger distance wins; ties go to the lower index. Associative and
// commutative, so the parallel reduction is schedule-independent.
inline Farthest pick(const Farthest& a, const Farthest& b) {
  if (a.dist > b.dist) return a;
  if (b.dist > a.dist) return b;
  return a.index <= b.index ? a : b;
}

#pragma omp declare reduction(farthest : Farthest : omp_out = pick(omp_out, omp_in)) \
    initializer(omp_priv = Farthest{-1.0, std::numeric_limits<Eigen::Index>::max()})

inline double sq_dist(const Points& p, Eigen::Index i, Eigen::Index j) {
  const double dx = p(i, 0) - p(j, 0), dy = p(i, 1) - p(j, 1), dz = p(i, 2) - p(j, 2);
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<Eigen::Index> farthest_point_sampling(const Points& points, Eigen::Index k,
                                                  const std::vector<Eigen::Index>& initial) {
  check_fps_args(points, k, initial);
  const Eigen::Index n = points.rows();
  std::vector<Eigen::Index> chosen = initial;
  if (chosen.empty()) chosen.push_back(0);
  chosen.reserve(static_cast<std::size_t>(k));
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  for (Eigen::Index c : chosen) taken[static_cast<std::size_t>(c)] = 1;
  std::size_t absorbed = 0;
  const bool fork = omp_get_max_threads() > 1;
  while (true) {
    // Fold every newly chosen point into the running min-distance.
    Farthest best{-1.0, std::numeric_limits<Eigen::Index>::max()};
    const std::size_t first_new = absorbed;
    absorbed = chosen.size();
    if (static_cast<Eigen::Index>(chosen.size()) >= k) break;
#pragma omp parallel for schedule(static) reduction(farthest : best) if (fork)
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = min_d[static_cast<std::size_t>(i)];
      for (std::size_t c = first_new; c < absorbed; ++c) d = std::min(d, sq_dist(points, i, chosen[c]));
      min_d[static_cast<std::size_t>(i)] = d;
      if (!taken[static_cast<std::size_t>(i)]) best = pick(best, Farthest{d, i});
    }
    chosen.push_back(best.index);
    taken[static_cast<std::size_t>(best.index)] = 1;
  }
  return chosen;
}

std::vector<Eigen::Index> farthest_point_sampling(const Points& points, Eigen::Index k, std::uint64_t seed) {
  if (k < 1 || k > points.rows()) {
    throw ContractError("FPS count " + std::to_string(k) + " outside [1, " + std::to_string(points.rows()) + "]");
  }
  Rng rng(seed, "fps");
  const auto start = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(points.rows())));
  return farthest_point_sampling(points, k, std::vector<Eigen::Index>{start});
}

namespace reference {

std::vector<Eigen::Index> farthest_point_sampling(const Points& points, Eigen::Index k,
                                                  const std::vector<Eigen::Index>& initial) {
  check_fps_args(points, k, initial);
  const Eigen::Index n = points.rows();
  std::vector<Eigen::Index> chosen = initial;
  if (chosen.empty()) chosen.push_back(0);
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  for (Eigen::Index c : chosen) taken[static_cast<std::size_t>(c)] = 1;
  std::size_t absorbed = 0;
  while (static_cast<Eigen::Index>(chosen.size()) < k) {
    for (; absorbed < chosen.size(); ++absorbed) {
      for (Eigen::Index i = 0; i < n; ++i) {
        min_d[static_cast<std::size_t>(i)] = std::min(min_d[static_cast<std::size_t>(i)], sq_dist(points, i, chosen[absorbed]));
      }
    }
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || min_d[static_cast<std::size_t>(i)] > min_d[static_cast<std::size_t>(best)]) best = i;
    }
    chosen.push_back(best);
    taken[static_cast<std::size_t>(best)] = 1;
  }
  return chosen;
}

}  // namespace reference

LinkClouds sample_link_clouds(const KinematicModel& model, const std::vector<TriangleMesh>& meshes,
                              const SamplingConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(meshes.size()) != model.n_links()) {
    throw ContractError("expected one mesh entry per model link");
  }
  std::vector<int> geometric;
  for (int i = 0; i < model.n_links(); ++i) {
    if (model.link(i).kind == LinkKind::body && !model.link(i).visuals.empty()) {
      if (meshes[static_cast<std::size_t>(i)].empty()) {
        throw DataError("link '" + model.link(i).name + "' has geometry but an empty mesh");
      }
      geometric.push_back(i);
    }
  }
  if (geometric.empty()) throw DataError("model '" + model.name() + "' has no link geometry to sample");
  const auto n_links = static_cast<Eigen::Index>(geometric.size());
  const Eigen::Index reserve = std::min<Eigen::Index>(cfg.min_points_per_link, cfg.n_per_link);
  if (cfg.n_total > cfg.n_per_link * n_links) {
    throw ContractError("n_total exceeds n_per_link x geometric link count");
  }
  if (reserve * n_links > cfg.n_total) {
    throw ContractError("n_total too small to reserve " + std::to_string(reserve) + " points on each of " +
                        std::to_string(n_links) + " links");
  }

  // Per-link surface samples, each link on its own stream.
  std::vector<Points> samples(geometric.size());
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index g = 0; g < n_links; ++g) {
    const int li = geometric[static_cast<std::size_t>(g)];
    samples[static_cast<std::size_t>(g)] =
        sample_surface(meshes[static_cast<std::size_t>(li)], cfg.n_per_link,
                       stream_seed(cfg.seed, "link_surface/" + model.link(li).name));
  }

  Points all(cfg.n_per_link * n_links, 3);
  for (Eigen::Index g = 0; g < n_links; ++g) all.middleRows(g * cfg.n_per_link, cfg.n_per_link) = samples[static_cast<std::size_t>(g)];

  // Reserve a few well-spread points per link, then FPS over the union.
  std::vector<Eigen::Index> initial;
  for (Eigen::Index g = 0; g < n_links && reserve > 0; ++g) {
    const auto local = farthest_point_sampling(samples[static_cast<std::size_t>(g)], reserve,
                                               stream_seed(cfg.seed, "link_reserve/" + model.link(geometric[static_cast<std::size_t>(g)]).name));
    for (Eigen::Index i : local) initial.push_back(g * cfg.n_per_link + i);
  }
  if (initial.empty()) {
    Rng rng(cfg.seed, "fps");
    initial.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(all.rows()))));
  }
  std::vector<Eigen::Index> chosen = farthest_point_sampling(all, cfg.n_total, initial);
  std::sort(chosen.begin(), chosen.end());

  LinkClouds out;
  out.per_link.assign(static_cast<std::size_t>(model.n_links()), Points(0, 3));
  std::vector<std::vector<Eigen::Index>> buckets(geometric.size());
  for (Eigen::Index idx : chosen) buckets[static_cast<std::size_t>(idx / cfg.n_per_link)].push_back(idx);
  for (std::size_t g = 0; g < geometric.size(); ++g) {
    Points p(static_cast<Eigen::Index>(buckets[g].size()), 3);
    for (std::size_t r = 0; r < buckets[g].size(); ++r) p.row(static_cast<Eigen::Index>(r)) = all.row(buckets[g][r]);
    out.per_link[static_cast<std::size_t>(geometric[g])] = std::move(p);
  }
  return out;
}

PointCloud to_point_cloud(const KinematicModel& model, const LinkClouds& clouds) {
  if (static_cast<int>(clouds.per_link.size()) != model.n_links()) {
    throw ContractError("link cloud count does not match model link count");
  }
  PointCloud out;
  out.points.resize(clouds.total_points(), 3);
  out.labels.reserve(static_cast<std::size_t>(clouds.total_points()));
  for (const auto& l : model.links()) out.label_names.push_back(l.name);
  Eigen::Index row = 0;
  for (int i = 0; i < model.n_links(); ++i) {
    const Points& p = clouds.per_link[static_cast<std::size_t>(i)];
    out.points.middleRows(row, p.rows()) = p;
    row += p.rows();
    out.labels.insert(out.labels.end(), static_cast<std::size_t>(p.rows()), static_cast<std::uint32_t>(i));
  }
  return out;
}

LinkClouds from_point_cloud(const KinematicModel& model, const PointCloud& cloud) {
  if (!cloud.labeled()) throw ContractError("robot cloud has no link labels");
  if (static_cast<Eigen::Index>(cloud.labels.size()) != cloud.size()) {
    throw ContractError("label count does not match point count");
  }
  std::vector<int> to_model(cloud.label_names.size(), -1);
  for (std::size_t i = 0; i < cloud.label_names.size(); ++i) {
    if (auto li = model.find_link(cloud.label_names[i])) to_model[i] = *li;
  }
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(model.n_links()));
  int last = -1;
  for (Eigen::Index r = 0; r < cloud.size(); ++r) {
    const std::uint32_t lab = cloud.labels[static_cast<std::size_t>(r)];
    if (lab >= to_model.size() || to_model[lab] < 0) {
      throw ContractError("point " + std::to_string(r) + " has a label that names no model link");
    }
    const int li = to_model[lab];
    if (li < last) throw ContractError("label segments are not in model link order");
    last = li;
    rows[static_cast<std::size_t>(li)].push_back(r);
  }
  LinkClouds out;
  out.per_link.resize(static_cast<std::size_t>(model.n_links()));
  for (std::size_t li = 0; li < rows.size(); ++li) {
    Points p(static_cast<Eigen::Index>(rows[li].size()), 3);
    for (std::size_t k = 0; k < rows[li].size(); ++k) p.row(static_cast<Eigen::Index>(k)) = cloud.points.row(rows[li][k]);
    out.per_link[li] = std::move(p);
  }
  return out;
}

PointCloud cloud_fk(const KinematicModel& model, const LinkPoseSet& poses, const LinkClouds& canonical) {
  if (static_cast<int>(canonical.per_link.size()) != model.n_links()) {
    throw ContractError("canonical clouds do not cover the model links");
  }
  PointCloud out = to_point_cloud(model, canonical);
  Eigen::Index row = 0;
  for (int i = 0; i < model.n_links(); ++i) {
    const Points& p = canonical.per_link[static_cast<std::size_t>(i)];
    if (p.rows() == 0) continue;
    const Pose& pose = poses[static_cast<std::size_t>(i)];
    out.points.middleRows(row, p.rows()) =
        (p * pose.linear().transpose()).rowwise() + pose.translation().transpose();
    row += p.rows();
  }
  return out;
}

PointCloud cloud_fk(const KinematicModel& model, const JointConfig& q, const LinkClouds& canonical) {
  return cloud_fk(model, forward_kinematics(model, q), canonical);
}

PointCloud sample_object_cloud(const TriangleMesh& mesh, const SamplingConfig& cfg) {
  cfg.validate();
  if (mesh.empty()) throw DataError("object mesh is empty");
  const Points pool = sample_surface(mesh, cfg.object_pool, stream_seed(cfg.seed, "object_pool"));
  // Partial Fisher-Yates: the first n_object slots are a uniform draw without replacement.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cfg.object_pool));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng pick(cfg.seed, "object_pick");
  for (int i = 0; i < cfg.n_object; ++i) {
    const auto j = i + static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(cfg.object_pool - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Rng noise(cfg.seed, "object_noise");
  PointCloud out;
  out.points.resize(cfg.n_object, 3);
  for (int i = 0; i < cfg.n_object; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.points(i, c) = pool(order[static_cast<std::size_t>(i)], c) + cfg.object_noise_sigma * noise.normal();
    }
  }
  return out;
}

Points partial_cloud(const Points& points, const Vec3& view_direction) {
  const Eigen::Index n = points.rows();
  if (n % 2 != 0) throw ContractError("partial_cloud needs an even point count, got " + std::to_string(n));
  const Vec3 c = centroid(points);
  std::vector<double> score(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 d = points.row(i).transpose() - c;
    const double len = d.norm();
    score[static_cast<std::size_t>(i)] = len > 0.0 ? view_direction.dot(d / len) : 0.0;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(n / 2));
  std::sort(order.begin(), order.end());
  Points out(n / 2, 3);
  for (std::size_t k = 0; k < order.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = points.row(order[k]);
  return out;
}

Points partial_cloud(const Points& points, std::uint64_t seed) {
  Rng rng(seed, "partial_view");
  Vec3 s;
  do {
    s = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (s.norm() < 1e-12);
  s.normalize();
  // Direction from the sphere sample towards the origin.
  return partial_cloud(points, Vec3(-s));
}

}  // namespace drg
