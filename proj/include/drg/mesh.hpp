#pragma once

#include "drg/kinematics.hpp"
#include "drg/points.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace drg {

struct TriangleMesh {
  Points vertices;
  Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor> triangles;

  Eigen::Index n_triangles() const { return triangles.rows(); }
  bool empty() const { return triangles.rows() == 0; }
  Vec3 vertex(Eigen::Index tri, int corner) const {
    return vertices.row(triangles(tri, corner)).transpose();
  }
};

/// Parse OBJ text (v and triangular f records). Zero-area triangles are
/// dropped. Throws DataError on out-of-range indices or non-triangle faces.
TriangleMesh parse_obj(std::string_view text, const std::string& source = "<obj>");
TriangleMesh load_obj(const std::filesystem::path& path);
std::string to_obj(const TriangleMesh& mesh);

TriangleMesh make_box(const Vec3& size);
/// Cylinder along local z, centered at the origin.
TriangleMesh make_cylinder(double radius, double length, int segments = 32);
/// Subdivided icosahedron projected on a sphere.
TriangleMesh make_icosphere(double radius, int subdivisions = 3);

TriangleMesh transformed(const TriangleMesh& mesh, const Pose& pose);
/// Concatenate b onto a.
void append(TriangleMesh& a, const TriangleMesh& b);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);
double surface_area(const TriangleMesh& mesh);

/// Closest point to p on triangle (a, b, c).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
/// Unsigned distance from p to the mesh surface (all triangles).
double distance_to_mesh(const TriangleMesh& mesh, const Vec3& p);
/// Generalized winding number: ~1 inside a closed, outward-oriented mesh, ~0 outside.
double winding_number(const TriangleMesh& mesh, const Vec3& p);
/// Distance to the surface, negative where the winding number exceeds 1/2.
double signed_distance(const TriangleMesh& mesh, const Vec3& p);

/// Every edge shared by exactly two triangles with opposite orientation, and
/// winding numbers on a probe set are integral to 1e-6.
bool is_watertight(const TriangleMesh& mesh);

}  // namespace drg
