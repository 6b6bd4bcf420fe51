#pragma once

#include "drg/cloud.hpp"
#include "drg/distance_matrix.hpp"
#include "drg/metrics.hpp"
#include "drg/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace drg {

using Bytes = std::vector<std::uint8_t>;

// DROPC point cloud, little-endian:
//   "DROPC\0" | u32 version = 1 | u32 N | u8 has_labels | N x 3 f64
//   if has_labels: N x u32 label | u32 trailer length | trailer
// The trailer is UTF-8 JSON mapping decimal label indices to link names,
// e.g. {"0":"palm","1":"finger_tip"}.
Bytes encode_dropc(const PointCloud& cloud);
PointCloud decode_dropc(const Bytes& bytes);

enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

// DROMX matrix, little-endian:
//   "DROMX\0" | u32 version = 1 | u32 rows | u32 cols | u8 dtype | row-major payload
Bytes encode_dromx(const DroMatrix& matrix, DType dtype = DType::f64);
DroMatrix decode_dromx(const Bytes& bytes);
/// Header size in bytes; payload follows immediately.
inline constexpr std::size_t kDromxHeaderSize = 6 + 4 + 4 + 4 + 1;

Bytes read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const Bytes& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

PointCloud read_dropc(const std::filesystem::path& path);
void write_dropc(const std::filesystem::path& path, const PointCloud& cloud);
DroMatrix read_dromx(const std::filesystem::path& path);
void write_dromx(const std::filesystem::path& path, const DroMatrix& matrix, DType dtype = DType::f64);

/// {link: {R: [9 row-major], x: [3]}} for every link with `include[i]`
/// set (all links when `include` is empty).
std::string link_poses_to_json(const KinematicModel& model, const LinkPoseSet& poses,
                               const std::vector<bool>& include = {});
std::map<std::string, Pose> link_poses_from_json(const std::string& text);

/// {q, residual, iterations, converged, elapsed: {multilateration, registration, optimization}}
std::string grasp_result_to_json(const GraspResult& result);

/// One JSON object per line: {robot, object, q, provenance, success?}.
std::string grasp_record_to_json(const GraspRecord& record);
std::vector<GraspRecord> parse_grasp_records(const std::string& jsonl);

/// FNV-1a 64 content hash, hex encoded.
std::string content_hash(const Bytes& bytes);
std::string content_hash(const std::string& text);

}  // namespace drg
