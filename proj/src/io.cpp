#include "rangeloc/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "rangeloc/errors.hpp"

namespace rangeloc {

using nlohmann::json;

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Mat3 rotation_from_row_major(const std::vector<double>& v) {
  if (v.size() != 9) throw ParseError("rotation needs 9 values, got " + std::to_string(v.size()));
  Mat3 R;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) R(r, c) = v[static_cast<std::size_t>(3 * r + c)];
  if (!R.allFinite()) throw ParseError("rotation has non-finite entries");
  if (is_rotation(R)) return R;
  if (!is_rotation(R, 1e-3)) throw ParseError("matrix is not a rotation (tolerance 1e-3)");
  return project_to_rotation(R);
}

namespace {

void for_each_record(const std::string& path, const std::function<void(const json&)>& fn) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

double finite_number(const json& j, const char* key) {
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ParseError(std::string("field '") + key + "' is not finite");
  return v;
}

Vec3 vec3_of(const json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw ParseError(std::string("field '") + key + "' needs 3 values");
  Vec3 out(v[0], v[1], v[2]);
  if (!out.allFinite()) throw ParseError(std::string("field '") + key + "' is not finite");
  return out;
}

json row_major(const Mat3& R) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(R(r, c));
  return a;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

void require_increasing(double t, std::optional<double>& last) {
  if (last && !(t > *last)) throw ParseError("timestamps must increase strictly");
  last = t;
}

}  // namespace

std::vector<RangeMeasurement> read_ranges(const std::string& path) {
  std::vector<RangeMeasurement> out;
  std::optional<double> last;
  for_each_record(path, [&](const json& j) {
    RangeMeasurement m{finite_number(j, "t"), j.at("anchor").get<AnchorId>(), finite_number(j, "d")};
    require_increasing(m.t, last);
    out.push_back(m);
  });
  return out;
}

std::vector<OrientationMeasurement> read_orientations(const std::string& path) {
  std::vector<OrientationMeasurement> out;
  std::optional<double> last;
  for_each_record(path, [&](const json& j) {
    OrientationMeasurement m{finite_number(j, "t"),
                             rotation_from_row_major(j.at("R").get<std::vector<double>>())};
    require_increasing(m.t, last);
    out.push_back(m);
  });
  return out;
}

AnchorSet read_anchors(const std::string& path) {
  AnchorSet out;
  for_each_record(path, [&](const json& j) { out.add({j.at("id").get<AnchorId>(), vec3_of(j, "p")}); });
  return out;
}

std::vector<Estimate> read_estimates(const std::string& path) {
  std::vector<Estimate> out;
  for_each_record(path, [&](const json& j) {
    Estimate e;
    e.t = finite_number(j, "t");
    e.p = vec3_of(j, "p");
    if (j.contains("R")) e.R = rotation_from_row_major(j.at("R").get<std::vector<double>>());
    out.push_back(e);
  });
  return out;
}

std::vector<TruthSample> read_truth(const std::string& path) {
  std::vector<TruthSample> out;
  std::optional<double> last;
  for_each_record(path, [&](const json& j) {
    TruthSample s;
    s.t = finite_number(j, "t");
    require_increasing(s.t, last);
    s.pose.t = vec3_of(j, "p");
    if (j.contains("R")) s.pose.R = rotation_from_row_major(j.at("R").get<std::vector<double>>());
    out.push_back(s);
  });
  return out;
}

std::string format_ranges(const std::vector<RangeMeasurement>& ranges) {
  std::string out;
  for (const auto& m : ranges) out += json{{"t", m.t}, {"anchor", m.anchor}, {"d", m.d}}.dump() + "\n";
  return out;
}

std::string format_orientations(const std::vector<OrientationMeasurement>& orientations) {
  std::string out;
  for (const auto& o : orientations) out += json{{"t", o.t}, {"R", row_major(o.R)}}.dump() + "\n";
  return out;
}

std::string format_anchors(const AnchorSet& anchors) {
  std::string out;
  for (const auto& a : anchors.anchors()) out += json{{"id", a.id}, {"p", vec_json(a.p)}}.dump() + "\n";
  return out;
}

std::string format_estimates(const std::vector<Estimate>& estimates) {
  std::string out;
  for (const auto& e : estimates) {
    json j{{"t", e.t}, {"p", vec_json(e.p)}};
    if (e.R) j["R"] = row_major(*e.R);
    out += j.dump() + "\n";
  }
  return out;
}

std::string format_truth(const std::vector<TruthSample>& truth) {
  std::string out;
  for (const auto& s : truth) {
    out += json{{"t", s.t}, {"p", vec_json(s.pose.t)}, {"R", row_major(s.pose.R)}}.dump() + "\n";
  }
  return out;
}

}  // namespace rangeloc
