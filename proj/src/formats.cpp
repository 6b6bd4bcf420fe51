#include "drg/formats.hpp"

#include "drg/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace drg {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kPcMagic[6] = {'D', 'R', 'O', 'P', 'C', '\0'};
constexpr char kMxMagic[6] = {'D', 'R', 'O', 'M', 'X', '\0'};

class Writer {
public:
  void raw(const char* data, std::size_t n) { out_.insert(out_.end(), data, data + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  Bytes take() { return std::move(out_); }

private:
  Bytes out_;
};

class Reader {
public:
  explicit Reader(const Bytes& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, " +
                            std::to_string(remaining()) + " left)",
                        pos_);
    }
  }
  void magic(const char (&expected)[6], const char* name) {
    need(6, "magic");
    if (std::memcmp(bytes_.data() + pos_, expected, 6) != 0) {
      throw FormatError(std::string("bad magic, not a ") + name + " file", pos_);
    }
    pos_ += 6;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void version() {
    const std::size_t at = pos_;
    const std::uint32_t v = u32("version");
    if (v != kVersion) throw FormatError("unsupported version " + std::to_string(v), at);
  }
  void end() const {
    if (remaining() != 0) throw FormatError(std::to_string(remaining()) + " trailing bytes", pos_);
  }

private:
  const Bytes& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(Eigen::Index n, const char* what) {
  if (n < 0 || static_cast<std::uint64_t>(n) > 0xffffffffULL) throw ContractError(std::string(what) + " too large for u32");
  return static_cast<std::uint32_t>(n);
}

}  // namespace

Bytes encode_dropc(const PointCloud& cloud) {
  const bool labeled = cloud.labeled();
  if (labeled && static_cast<Eigen::Index>(cloud.labels.size()) != cloud.size()) {
    throw ContractError("label count does not match point count");
  }
  Writer w;
  w.raw(kPcMagic, 6);
  w.u32(kVersion);
  w.u32(checked_u32(cloud.size(), "point count"));
  w.u8(labeled ? 1 : 0);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) w.f64(cloud.points(i, c));
  }
  if (labeled) {
    for (std::uint32_t l : cloud.labels) {
      if (l >= cloud.label_names.size()) throw ContractError("label index without a name");
      w.u32(l);
    }
    nlohmann::ordered_json trailer = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < cloud.label_names.size(); ++i) trailer[std::to_string(i)] = cloud.label_names[i];
    const std::string text = trailer.dump();
    w.u32(checked_u32(static_cast<Eigen::Index>(text.size()), "trailer"));
    w.raw(text.data(), text.size());
  }
  return w.take();
}

PointCloud decode_dropc(const Bytes& bytes) {
  Reader r(bytes);
  r.magic(kPcMagic, "DROPC");
  r.version();
  const std::uint32_t n = r.u32("point count");
  const std::size_t flag_at = r.offset();
  const std::uint8_t has_labels = r.u8("label flag");
  if (has_labels > 1) throw FormatError("label flag must be 0 or 1", flag_at);
  r.need(static_cast<std::size_t>(n) * 24, "coordinates");
  PointCloud cloud;
  cloud.points.resize(n, 3);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) cloud.points(i, c) = r.f64("coordinate");
  }
  if (has_labels) {
    r.need(static_cast<std::size_t>(n) * 4, "labels");
    cloud.labels.resize(n);
    std::vector<std::size_t> label_at(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      label_at[i] = r.offset();
      cloud.labels[i] = r.u32("label");
    }
    const std::uint32_t len = r.u32("trailer length");
    const std::size_t trailer_at = r.offset();
    const std::string text = r.text(len, "trailer");
    nlohmann::json trailer;
    try {
      trailer = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("label trailer is not JSON: ") + e.what(), trailer_at);
    }
    if (!trailer.is_object()) throw FormatError("label trailer must be a JSON object", trailer_at);
    cloud.label_names.resize(trailer.size());
    std::vector<bool> seen(trailer.size(), false);
    for (const auto& [key, value] : trailer.items()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw FormatError("label trailer key '" + key + "' is not an index", trailer_at);
      }
      if (idx >= seen.size() || seen[idx] || !value.is_string()) {
        throw FormatError("label trailer entries must be a dense index -> name map", trailer_at);
      }
      seen[idx] = true;
      cloud.label_names[idx] = value.get<std::string>();
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      if (cloud.labels[i] >= cloud.label_names.size()) {
        throw FormatError("label " + std::to_string(cloud.labels[i]) + " has no name in the trailer", label_at[i]);
      }
    }
  }
  r.end();
  return cloud;
}

Bytes encode_dromx(const DroMatrix& matrix, DType dtype) {
  Writer w;
  w.raw(kMxMagic, 6);
  w.u32(kVersion);
  w.u32(checked_u32(matrix.rows(), "rows"));
  w.u32(checked_u32(matrix.cols(), "cols"));
  w.u8(static_cast<std::uint8_t>(dtype));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (dtype == DType::f64) {
        w.f64(matrix(i, j));
      } else {
        w.f32(static_cast<float>(matrix(i, j)));
      }
    }
  }
  return w.take();
}

DroMatrix decode_dromx(const Bytes& bytes) {
  Reader r(bytes);
  r.magic(kMxMagic, "DROMX");
  r.version();
  const std::uint32_t rows = r.u32("rows");
  const std::uint32_t cols = r.u32("cols");
  const std::size_t dtype_at = r.offset();
  const std::uint8_t dtype = r.u8("dtype");
  if (dtype > 1) throw FormatError("dtype must be 0 (f64) or 1 (f32)", dtype_at);
  const std::size_t width = dtype == 0 ? 8 : 4;
  r.need(static_cast<std::size_t>(rows) * cols * width, "payload");
  DroMatrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      m(i, j) = dtype == 0 ? r.f64("value") : static_cast<double>(r.f32("value"));
    }
  }
  r.end();
  return m;
}

Bytes read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

namespace {

template <typename Decode>
auto decode_file(const std::filesystem::path& path, Decode decode) {
  const Bytes bytes = read_bytes(path);
  try {
    return decode(bytes);
  } catch (const FormatError& e) {
    std::string msg = e.what();
    const std::string prefix = "byte " + std::to_string(e.offset()) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw FormatError(path.string() + ": " + msg, e.offset());
  }
}

}  // namespace

PointCloud read_dropc(const std::filesystem::path& path) { return decode_file(path, decode_dropc); }
void write_dropc(const std::filesystem::path& path, const PointCloud& cloud) { write_bytes(path, encode_dropc(cloud)); }
DroMatrix read_dromx(const std::filesystem::path& path) { return decode_file(path, decode_dromx); }
void write_dromx(const std::filesystem::path& path, const DroMatrix& matrix, DType dtype) {
  write_bytes(path, encode_dromx(matrix, dtype));
}

std::string link_poses_to_json(const KinematicModel& model, const LinkPoseSet& poses, const std::vector<bool>& include) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (int i = 0; i < model.n_links(); ++i) {
    if (!include.empty() && !include[static_cast<std::size_t>(i)]) continue;
    const Pose& p = poses[static_cast<std::size_t>(i)];
    nlohmann::ordered_json e;
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot.push_back(p.linear()(r, c));
    }
    e["R"] = rot;
    e["x"] = {p.translation().x(), p.translation().y(), p.translation().z()};
    j[model.link(i).name] = std::move(e);
  }
  return j.dump(2);
}

std::map<std::string, Pose> link_poses_from_json(const std::string& text) {
  std::map<std::string, Pose> out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [name, e] : j.items()) {
      const auto rot = e.at("R").get<std::vector<double>>();
      const auto x = e.at("x").get<std::vector<double>>();
      if (rot.size() != 9 || x.size() != 3) throw DataError("pose '" + name + "' needs 9 rotation and 3 translation values");
      Pose p = Pose::Identity();
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p.linear()(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
      }
      p.translation() = Vec3(x[0], x[1], x[2]);
      out[name] = p;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid link pose JSON: ") + e.what());
  }
  return out;
}

std::string grasp_result_to_json(const GraspResult& result) {
  nlohmann::ordered_json j;
  j["q"] = std::vector<double>(result.q.data(), result.q.data() + result.q.size());
  j["residual"] = result.report.final_residual;
  j["iterations"] = result.report.iterations;
  j["converged"] = result.report.converged;
  j["elapsed"] = {{"multilateration", result.elapsed.multilateration},
                  {"registration", result.elapsed.registration},
                  {"optimization", result.elapsed.optimization}};
  return j.dump(2);
}

std::string grasp_record_to_json(const GraspRecord& record) {
  nlohmann::ordered_json j;
  j["robot"] = record.robot_id;
  j["object"] = record.object_id;
  j["q"] = std::vector<double>(record.q.data(), record.q.data() + record.q.size());
  j["provenance"] = std::string(to_string(record.provenance));
  if (record.success) j["success"] = *record.success;
  return j.dump();
}

std::vector<GraspRecord> parse_grasp_records(const std::string& jsonl) {
  std::vector<GraspRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GraspRecord r;
      r.robot_id = j.at("robot").get<std::string>();
      r.object_id = j.at("object").get<std::string>();
      const auto q = j.at("q").get<std::vector<double>>();
      r.q = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
      r.provenance = provenance_from_string(j.value("provenance", std::string("dataset")));
      if (j.contains("success") && !j["success"].is_null()) r.success = j["success"].get<bool>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("grasp record line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("grasp record line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string content_hash(const Bytes& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::string content_hash(const std::string& text) { return content_hash(Bytes(text.begin(), text.end())); }

}  // namespace drg
