#include "drg/error.hpp"
#include "drg/kinematics.hpp"

#include <cctype>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace drg {

namespace pt = boost::property_tree;

namespace {

constexpr double kVirtualTranslationLimit = 10.0;

struct RawJoint {
  JointSpec spec;
  bool has_limit = false;
  std::string type;
};

std::optional<std::string> attribute(const pt::ptree& node, const std::string& key) {
  if (auto v = node.get_optional<std::string>("<xmlattr>." + key)) return *v;
  return std::nullopt;
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expected,
                                  const std::string& what) {
  std::istringstream in(text);
  std::vector<double> values;
  double v;
  while (in >> v) values.push_back(v);
  if (!in.eof() || values.size() != expected) {
    throw StructuralError(what + ": expected " + std::to_string(expected) +
                          " numbers, got '" + text + "'");
  }
  return values;
}

Vec3 parse_vec3(const std::string& text, const std::string& what) {
  const auto v = parse_numbers(text, 3, what);
  return {v[0], v[1], v[2]};
}

double parse_scalar(const std::string& text, const std::string& what) {
  return parse_numbers(text, 1, what)[0];
}

Mat3 rpy_matrix(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Pose parse_origin(const pt::ptree& parent, const std::string& what) {
  Pose pose = Pose::Identity();
  const auto node = parent.get_child_optional("origin");
  if (!node) return pose;
  if (auto xyz = attribute(*node, "xyz")) pose.translation() = parse_vec3(*xyz, what + " origin xyz");
  if (auto rpy = attribute(*node, "rpy")) {
    const Vec3 r = parse_vec3(*rpy, what + " origin rpy");
    pose.linear() = rpy_matrix(r.x(), r.y(), r.z());
  }
  return pose;
}

std::optional<Geometry> parse_geometry(const pt::ptree& element, const std::string& link) {
  const auto geom = element.get_child_optional("geometry");
  if (!geom) return std::nullopt;
  Geometry g;
  g.origin = parse_origin(element, "link '" + link + "'");
  if (auto box = geom->get_child_optional("box")) {
    g.shape = Geometry::Shape::box;
    g.size = parse_vec3(attribute(*box, "size").value_or(""), "link '" + link + "' box size");
  } else if (auto cyl = geom->get_child_optional("cylinder")) {
    g.shape = Geometry::Shape::cylinder;
    g.radius = parse_scalar(attribute(*cyl, "radius").value_or(""), "link '" + link + "' cylinder radius");
    g.length = parse_scalar(attribute(*cyl, "length").value_or(""), "link '" + link + "' cylinder length");
  } else if (auto sph = geom->get_child_optional("sphere")) {
    g.shape = Geometry::Shape::sphere;
    g.radius = parse_scalar(attribute(*sph, "radius").value_or(""), "link '" + link + "' sphere radius");
  } else if (auto mesh = geom->get_child_optional("mesh")) {
    g.shape = Geometry::Shape::mesh;
    g.filename = attribute(*mesh, "filename").value_or("");
    if (auto s = attribute(*mesh, "scale")) g.scale = parse_vec3(*s, "link '" + link + "' mesh scale");
  } else {
    return std::nullopt;
  }
  return g;
}

JointSpec virtual_joint(const std::string& name, JointKind kind, const Vec3& axis) {
  JointSpec j;
  j.name = name;
  j.kind = kind;
  j.axis = axis;
  if (kind == JointKind::virtual_prismatic) {
    j.lower = -kVirtualTranslationLimit;
    j.upper = kVirtualTranslationLimit;
  } else {
    j.lower = -std::numbers::pi;
    j.upper = std::numbers::pi;
  }
  return j;
}

// rapidxml (under property_tree) does not match closing tag names and only
// notices an unclosed element at end of input. This scan reports the line
// where the unclosed element starts. Other syntax errors are left to the parser.
void check_tag_balance(std::string_view text) {
  struct Open {
    std::string name;
    std::size_t line;
  };
  std::vector<Open> open;
  std::size_t line = 1;
  std::size_t i = 0;
  const auto advance_to = [&](std::size_t end) {
    for (; i < end && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
  };
  const auto skip_past = [&](std::string_view close) {
    const auto end = text.find(close, i);
    if (end == std::string_view::npos) return false;
    advance_to(end + close.size());
    return true;
  };
  while (i < text.size()) {
    if (text[i] != '<') {
      advance_to(i + 1);
      continue;
    }
    const std::size_t tag_line = line;
    if (text.substr(i, 4) == "<!--") {
      if (!skip_past("-->")) return;
      continue;
    }
    if (text.substr(i, 9) == "<![CDATA[") {
      if (!skip_past("]]>")) return;
      continue;
    }
    if (text.substr(i, 2) == "<?") {
      if (!skip_past("?>")) return;
      continue;
    }
    if (text.substr(i, 2) == "<!") {
      if (!skip_past(">")) return;
      continue;
    }
    std::size_t j = i + 1;
    char quote = 0;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (quote != 0) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '>') {
        break;
      }
    }
    if (j >= text.size()) return;
    const std::string_view body = text.substr(i + 1, j - i - 1);
    advance_to(j + 1);
    const bool closing = !body.empty() && body.front() == '/';
    const bool self_closing = !body.empty() && body.back() == '/';
    std::size_t b = closing ? 1 : 0;
    std::size_t e = b;
    while (e < body.size() && !std::isspace(static_cast<unsigned char>(body[e])) && body[e] != '/') ++e;
    const std::string name(body.substr(b, e - b));
    if (closing) {
      if (open.empty()) throw ParseError("closing tag </" + name + "> has no start tag", tag_line);
      if (open.back().name != name) {
        throw ParseError("<" + open.back().name + "> is not closed (found </" + name + "> on line " +
                             std::to_string(tag_line) + ")",
                         open.back().line);
      }
      open.pop_back();
    } else if (!self_closing) {
      open.push_back({name, tag_line});
    }
  }
  if (!open.empty()) throw ParseError("<" + open.back().name + "> is not closed", open.back().line);
}

}  // namespace

class ModelBuilder {
public:
  static KinematicModel build(std::string_view urdf_text, const ModelOptions& options);
};

KinematicModel ModelBuilder::build(std::string_view urdf_text, const ModelOptions& options) {
  check_tag_balance(urdf_text);
  pt::ptree doc;
  {
    std::istringstream in{std::string(urdf_text)};
    try {
      pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
      throw ParseError(e.message(), e.line());
    }
  }
  const auto robot = doc.get_child_optional("robot");
  if (!robot) throw StructuralError("URDF has no <robot> element");

  KinematicModel model;
  model.name_ = attribute(*robot, "name").value_or("robot");

  // Source links and joints in document order.
  std::vector<Link> src_links;
  std::map<std::string, int> src_index;
  std::vector<RawJoint> src_joints;
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      Link link;
      link.name = attribute(node, "name").value_or("");
      if (link.name.empty()) throw StructuralError("link without a name");
      if (src_index.count(link.name)) throw StructuralError("duplicate link '" + link.name + "'");
      for (const auto& [child_tag, child] : node) {
        if (child_tag == "visual") {
          if (auto g = parse_geometry(child, link.name)) link.visuals.push_back(*g);
        }
      }
      if (link.visuals.empty()) {
        for (const auto& [child_tag, child] : node) {
          if (child_tag == "collision") {
            if (auto g = parse_geometry(child, link.name)) link.visuals.push_back(*g);
          }
        }
      }
      src_index[link.name] = static_cast<int>(src_links.size());
      src_links.push_back(std::move(link));
    } else if (tag == "joint") {
      RawJoint raw;
      JointSpec& j = raw.spec;
      j.name = attribute(node, "name").value_or("");
      raw.type = attribute(node, "type").value_or("");
      if (j.name.empty()) throw StructuralError("joint without a name");
      const auto parent = node.get_child_optional("parent");
      const auto child = node.get_child_optional("child");
      if (!parent || !child) throw StructuralError("joint '" + j.name + "' lacks parent or child");
      j.parent_link = attribute(*parent, "link").value_or("");
      j.child_link = attribute(*child, "link").value_or("");
      j.origin = parse_origin(node, "joint '" + j.name + "'");
      if (auto axis = node.get_child_optional("axis")) {
        j.axis = parse_vec3(attribute(*axis, "xyz").value_or("1 0 0"), "joint '" + j.name + "' axis");
      }
      if (auto limit = node.get_child_optional("limit")) {
        const auto lo = attribute(*limit, "lower");
        const auto hi = attribute(*limit, "upper");
        if (lo && hi) {
          raw.has_limit = true;
          j.lower = parse_scalar(*lo, "joint '" + j.name + "' lower limit");
          j.upper = parse_scalar(*hi, "joint '" + j.name + "' upper limit");
        }
      }
      src_joints.push_back(std::move(raw));
    }
  }
  if (src_links.empty()) throw StructuralError("URDF has no links");

  // Validate joint types, limits and axes.
  for (auto& raw : src_joints) {
    JointSpec& j = raw.spec;
    if (raw.type == "revolute" || raw.type == "prismatic") {
      j.kind = raw.type == "revolute" ? JointKind::revolute : JointKind::prismatic;
      if (!raw.has_limit) throw StructuralError("movable joint '" + j.name + "' has no limit");
    } else if (raw.type == "continuous") {
      j.kind = JointKind::revolute;
      if (!raw.has_limit) {
        j.lower = -std::numbers::pi;
        j.upper = std::numbers::pi;
      }
    } else if (raw.type == "fixed") {
      j.kind = JointKind::fixed;
    } else {
      throw StructuralError("joint '" + j.name + "' has unsupported type '" + raw.type + "'");
    }
    if (j.kind != JointKind::fixed) {
      const double n = j.axis.norm();
      if (!(n > 1e-12)) throw StructuralError("joint '" + j.name + "' has a zero axis");
      j.axis /= n;
      if (!(j.lower <= j.upper)) throw StructuralError("joint '" + j.name + "' has lower > upper");
    }
  }

  // Tree structure: every link has at most one parent and exactly one root.
  std::vector<int> parent_of(src_links.size(), -1);
  std::vector<std::vector<int>> children_of(src_links.size());
  for (std::size_t ji = 0; ji < src_joints.size(); ++ji) {
    const JointSpec& j = src_joints[ji].spec;
    const auto p = src_index.find(j.parent_link);
    const auto c = src_index.find(j.child_link);
    if (p == src_index.end()) throw StructuralError("joint '" + j.name + "' names unknown parent '" + j.parent_link + "'");
    if (c == src_index.end()) throw StructuralError("joint '" + j.name + "' names unknown child '" + j.child_link + "'");
    if (parent_of[static_cast<std::size_t>(c->second)] != -1) {
      throw StructuralError("kinematic loop: link '" + j.child_link + "' has more than one parent joint");
    }
    parent_of[static_cast<std::size_t>(c->second)] = static_cast<int>(ji);
    children_of[static_cast<std::size_t>(p->second)].push_back(static_cast<int>(ji));
  }
  std::vector<int> roots;
  for (std::size_t i = 0; i < src_links.size(); ++i) {
    if (parent_of[i] == -1) roots.push_back(static_cast<int>(i));
  }
  if (roots.empty()) throw StructuralError("kinematic loop: no root link");
  if (roots.size() > 1) {
    throw StructuralError("URDF has " + std::to_string(roots.size()) + " root links ('" +
                          src_links[static_cast<std::size_t>(roots[0])].name + "', '" +
                          src_links[static_cast<std::size_t>(roots[1])].name + "')");
  }

  // Floating wrist chain: world -x-> -y-> -z-> -yaw-> -pitch-> -roll-> root.
  struct WristStep {
    const char* joint;
    const char* frame;
    JointKind kind;
    Vec3 axis;
    int dof;
  };
  const WristStep wrist[] = {
      {"virtual_x", "virtual_x_frame", JointKind::virtual_prismatic, Vec3::UnitX(), 0},
      {"virtual_y", "virtual_y_frame", JointKind::virtual_prismatic, Vec3::UnitY(), 1},
      {"virtual_z", "virtual_z_frame", JointKind::virtual_prismatic, Vec3::UnitZ(), 2},
      {"virtual_yaw", "virtual_yaw_frame", JointKind::virtual_revolute, Vec3::UnitZ(), 5},
      {"virtual_pitch", "virtual_pitch_frame", JointKind::virtual_revolute, Vec3::UnitY(), 4},
      {"virtual_roll", "", JointKind::virtual_revolute, Vec3::UnitX(), 3},
  };
  std::vector<int> dof_joint(KinematicModel::kWristDofs, -1);
  int parent_link = -1;
  for (const auto& step : wrist) {
    JointSpec j = virtual_joint(step.joint, step.kind, step.axis);
    j.parent = parent_link;
    j.parent_link = parent_link < 0 ? "" : model.links_[static_cast<std::size_t>(parent_link)].name;
    j.dof = step.dof;
    dof_joint[static_cast<std::size_t>(step.dof)] = static_cast<int>(model.joints_.size());
    if (*step.frame != '\0') {
      Link frame;
      frame.name = step.frame;
      frame.kind = LinkKind::wrist_frame;
      frame.parent_joint = static_cast<int>(model.joints_.size());
      j.child = static_cast<int>(model.links_.size());
      j.child_link = frame.name;
      model.links_.push_back(std::move(frame));
      parent_link = j.child;
    }
    model.joints_.push_back(std::move(j));
  }
  const int roll_joint = static_cast<int>(model.joints_.size()) - 1;

  // Depth-first copy of the source tree, children in document order.
  std::map<std::string, bool> used_names;
  for (const auto& l : src_links) used_names[l.name] = true;
  const double tip_len = options.virtual_tip_extension_length;
  const Vec3 tip_axis = options.tip_extension_axis.normalized();

  std::vector<std::pair<int, int>> stack;  // (source link, incoming model joint)
  stack.emplace_back(roots[0], roll_joint);
  std::size_t visited = 0;
  while (!stack.empty()) {
    const auto [src, incoming] = stack.back();
    stack.pop_back();
    ++visited;
    Link link = src_links[static_cast<std::size_t>(src)];
    const int link_idx = static_cast<int>(model.links_.size());
    link.parent_joint = incoming;
    link.child_joints.clear();
    JointSpec& in = model.joints_[static_cast<std::size_t>(incoming)];
    in.child = link_idx;
    in.child_link = link.name;
    if (in.parent >= 0) model.links_[static_cast<std::size_t>(in.parent)].child_joints.push_back(incoming);
    if (incoming == roll_joint) model.root_link_ = link_idx;
    model.links_.push_back(std::move(link));

    const auto& kids = children_of[static_cast<std::size_t>(src)];
    if (kids.empty()) {
      // Leaf: append the tip extension.
      std::string name = model.links_.back().name + "_tip";
      while (used_names.count(name)) name += "_";
      used_names[name] = true;
      JointSpec j;
      j.name = name + "_joint";
      j.kind = JointKind::fixed;
      j.origin = Pose::Identity();
      j.origin.translation() = tip_len * tip_axis;
      j.parent = link_idx;
      j.parent_link = model.links_.back().name;
      j.child = static_cast<int>(model.links_.size());
      j.child_link = name;
      model.links_[static_cast<std::size_t>(link_idx)].child_joints.push_back(static_cast<int>(model.joints_.size()));
      Link tip;
      tip.name = name;
      tip.kind = LinkKind::tip_extension;
      tip.parent_joint = static_cast<int>(model.joints_.size());
      model.joints_.push_back(std::move(j));
      model.links_.push_back(std::move(tip));
      continue;
    }
    // Push in reverse so the first child is visited first.
    std::vector<std::pair<int, int>> pending;
    for (int ji : kids) {
      JointSpec j = src_joints[static_cast<std::size_t>(ji)].spec;
      j.parent = link_idx;
      const int model_joint = static_cast<int>(model.joints_.size());
      if (j.kind != JointKind::fixed) {
        j.dof = static_cast<int>(dof_joint.size());
        dof_joint.push_back(model_joint);
      }
      model.joints_.push_back(std::move(j));
      pending.emplace_back(src_index.at(src_joints[static_cast<std::size_t>(ji)].spec.child_link), model_joint);
    }
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) stack.push_back(*it);
  }

  if (visited != src_links.size()) {
    throw StructuralError("kinematic loop: " + std::to_string(src_links.size() - visited) +
                          " links are unreachable from root '" + src_links[static_cast<std::size_t>(roots[0])].name + "'");
  }

  // Joints are numbered in visit order above, but the dof order must follow
  // the link (depth-first) order. Renumber actuated dofs accordingly.
  {
    std::vector<int> actuated;
    for (const auto& link : model.links_) {
      const int ji = link.parent_joint;
      if (ji < 0) continue;
      const JointSpec& j = model.joints_[static_cast<std::size_t>(ji)];
      if (j.movable() && j.dof >= KinematicModel::kWristDofs) actuated.push_back(ji);
    }
    dof_joint.resize(KinematicModel::kWristDofs);
    for (int ji : actuated) {
      model.joints_[static_cast<std::size_t>(ji)].dof = static_cast<int>(dof_joint.size());
      dof_joint.push_back(ji);
    }
  }

  model.dof_joints_ = std::move(dof_joint);
  const auto n = static_cast<Eigen::Index>(model.dof_joints_.size());
  model.lower_.resize(n);
  model.upper_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const JointSpec& j = model.joints_[static_cast<std::size_t>(model.dof_joints_[static_cast<std::size_t>(i)])];
    model.lower_[i] = j.lower;
    model.upper_[i] = j.upper;
  }
  return model;
}

KinematicModel load_model(std::string_view urdf_text, const ModelOptions& options) {
  return ModelBuilder::build(urdf_text, options);
}

}  // namespace drg
