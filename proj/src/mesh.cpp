#include "drg/mesh.hpp"

#include "drg/error.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

namespace drg {

namespace {

using TriangleList = std::vector<std::array<int, 3>>;

TriangleMesh assemble(const std::vector<Vec3>& verts, const TriangleList& tris) {
  TriangleMesh m;
  m.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  m.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    for (int c = 0; c < 3; ++c) m.triangles(static_cast<Eigen::Index>(i), c) = tris[i][static_cast<std::size_t>(c)];
  }
  return m;
}

constexpr double kMinTriangleArea = 1e-18;

}  // namespace

TriangleMesh parse_obj(std::string_view text, const std::string& source) {
  std::vector<Vec3> verts;
  TriangleList tris;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw DataError(source + ":" + std::to_string(lineno) + ": malformed vertex");
      }
      verts.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        long value = 0;
        try {
          value = std::stol(tok.substr(0, slash));
        } catch (const std::exception&) {
          throw DataError(source + ":" + std::to_string(lineno) + ": malformed face index '" + tok + "'");
        }
        const long n = static_cast<long>(verts.size());
        const long resolved = value < 0 ? n + value : value - 1;
        if (resolved < 0 || resolved >= n) {
          throw DataError(source + ":" + std::to_string(lineno) + ": face index " + tok + " out of range");
        }
        idx.push_back(static_cast<int>(resolved));
      }
      if (idx.size() != 3) {
        throw DataError(source + ":" + std::to_string(lineno) + ": face with " + std::to_string(idx.size()) +
                        " vertices (only triangles are supported)");
      }
      tris.push_back({idx[0], idx[1], idx[2]});
    }
  }
  TriangleList kept;
  kept.reserve(tris.size());
  for (const auto& t : tris) {
    const auto v = [&](int i) { return verts[static_cast<std::size_t>(t[static_cast<std::size_t>(i)])]; };
    if (triangle_area(v(0), v(1), v(2)) > kMinTriangleArea) kept.push_back(t);
  }
  return assemble(verts, kept);
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mesh file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str(), path.string());
}

std::string to_obj(const TriangleMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    out << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2) << '\n';
  }
  for (Eigen::Index i = 0; i < mesh.triangles.rows(); ++i) {
    out << "f " << mesh.triangles(i, 0) + 1 << ' ' << mesh.triangles(i, 1) + 1 << ' ' << mesh.triangles(i, 2) + 1
        << '\n';
  }
  return out.str();
}

TriangleMesh make_box(const Vec3& size) {
  const Vec3 h = 0.5 * size;
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  const TriangleList t = {
      {0, 2, 1}, {1, 2, 3},  // -z
      {4, 5, 6}, {5, 7, 6},  // +z
      {0, 1, 4}, {1, 5, 4},  // -y
      {2, 6, 3}, {3, 6, 7},  // +y
      {0, 4, 2}, {2, 4, 6},  // -x
      {1, 3, 5}, {3, 7, 5},  // +x
  };
  return assemble(v, t);
}

TriangleMesh make_cylinder(double radius, double length, int segments) {
  std::vector<Vec3> v;
  TriangleList t;
  const double hz = 0.5 * length;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    v.emplace_back(radius * std::cos(a), radius * std::sin(a), -hz);
    v.emplace_back(radius * std::cos(a), radius * std::sin(a), hz);
  }
  const int bottom = static_cast<int>(v.size());
  v.emplace_back(0.0, 0.0, -hz);
  const int top = static_cast<int>(v.size());
  v.emplace_back(0.0, 0.0, hz);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const int b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
    t.push_back({b0, b1, t1});
    t.push_back({b0, t1, t0});
    t.push_back({bottom, b1, b0});
    t.push_back({top, t0, t1});
  }
  return assemble(v, t);
}

TriangleMesh make_icosphere(double radius, int subdivisions) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
      {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1},
  };
  for (auto& x : v) x.normalize();
  TriangleList t = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    const auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    TriangleList next;
    for (const auto& tri : t) {
      const int a = mid(tri[0], tri[1]), b = mid(tri[1], tri[2]), c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    t = std::move(next);
  }
  for (auto& x : v) x *= radius;
  return assemble(v, t);
}

TriangleMesh transformed(const TriangleMesh& mesh, const Pose& pose) {
  TriangleMesh out = mesh;
  for (Eigen::Index i = 0; i < out.vertices.rows(); ++i) {
    out.vertices.row(i) = (pose * Vec3(mesh.vertices.row(i).transpose())).transpose();
  }
  return out;
}

void append(TriangleMesh& a, const TriangleMesh& b) {
  const Eigen::Index nv = a.vertices.rows(), nt = a.triangles.rows();
  a.vertices.conservativeResize(nv + b.vertices.rows(), 3);
  a.vertices.bottomRows(b.vertices.rows()) = b.vertices;
  a.triangles.conservativeResize(nt + b.triangles.rows(), 3);
  a.triangles.bottomRows(b.triangles.rows()) = b.triangles.array() + static_cast<int>(nv);
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double surface_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (Eigen::Index i = 0; i < mesh.n_triangles(); ++i) {
    area += triangle_area(mesh.vertex(i, 0), mesh.vertex(i, 1), mesh.vertex(i, 2));
  }
  return area;
}

// Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double distance_to_mesh(const TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mesh.n_triangles(); ++i) {
    const Vec3 c = closest_point_on_triangle(p, mesh.vertex(i, 0), mesh.vertex(i, 1), mesh.vertex(i, 2));
    best = std::min(best, (c - p).squaredNorm());
  }
  return std::sqrt(best);
}

double winding_number(const TriangleMesh& mesh, const Vec3& p) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < mesh.n_triangles(); ++i) {
    const Vec3 a = mesh.vertex(i, 0) - p, b = mesh.vertex(i, 1) - p, c = mesh.vertex(i, 2) - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double det = a.dot(b.cross(c));
    const double div = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    total += 2.0 * std::atan2(det, div);
  }
  return total / (4.0 * std::numbers::pi);
}

double signed_distance(const TriangleMesh& mesh, const Vec3& p) {
  const double d = distance_to_mesh(mesh, p);
  return winding_number(mesh, p) > 0.5 ? -d : d;
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.empty()) return false;
  // Directed edge counts: a closed consistently oriented surface has each
  // directed edge exactly once and its reverse exactly once.
  std::map<std::pair<int, int>, int> directed;
  for (Eigen::Index i = 0; i < mesh.n_triangles(); ++i) {
    for (int c = 0; c < 3; ++c) {
      ++directed[{mesh.triangles(i, c), mesh.triangles(i, (c + 1) % 3)}];
    }
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) return false;
    const auto rev = directed.find({edge.second, edge.first});
    if (rev == directed.end() || rev->second != 1) return false;
  }
  const Vec3 lo = mesh.vertices.colwise().minCoeff().transpose();
  const Vec3 hi = mesh.vertices.colwise().maxCoeff().transpose();
  const Vec3 center = 0.5 * (lo + hi), ext = hi - lo;
  const double probes[][3] = {{0.0, 0.0, 0.0},       {0.2371, -0.1313, 0.0917}, {-0.3119, 0.2087, -0.2741},
                              {0.4133, 0.3571, -0.1179}, {1.7, -1.3, 2.1},      {-2.3, 1.1, -0.7}};
  for (const auto& pr : probes) {
    const Vec3 p = center + Vec3(pr[0], pr[1], pr[2]).cwiseProduct(ext);
    const double w = winding_number(mesh, p);
    if (std::abs(w - std::round(w)) > 1e-6) return false;
  }
  return true;
}

}  // namespace drg
