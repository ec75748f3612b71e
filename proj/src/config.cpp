#include "rangeloc/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "rangeloc/errors.hpp"
#include "rangeloc/io.hpp"

namespace rangeloc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 3) throw ConfigError("key '" + key + "': expected 'x, y, z', got '" + v + "'");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string vec_text(const Vec3& v) { return num(v.x()) + ", " + num(v.y()) + ", " + num(v.z()); }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field number_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = to_double(k, v);
          },
          [member](const RunConfig& c) { return num(member(c)); }};
}

template <typename Member>
Field count_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_u64(k, v));
          },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Field optional_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            if (trim(v) == "none" || trim(v).empty()) {
              member(c).reset();
            } else {
              member(c) = to_double(k, v);
            }
          },
          [member](const RunConfig& c) {
            const auto& o = member(c);
            return o ? num(*o) : std::string("none");
          }};
}

template <typename Member>
Field string_field(Member member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { member(c) = trim(v); },
          [member](const RunConfig& c) { return member(c); }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    // estimator.*
    f["estimator.window"] = count_field([](auto& c) -> auto& { return c.estimator.window; });
    f["estimator.v_max"] = number_field([](auto& c) -> auto& { return c.estimator.v_max; });
    f["estimator.eta"] = number_field([](auto& c) -> auto& { return c.estimator.eta; });
    f["estimator.f"] = number_field([](auto& c) -> auto& { return c.estimator.f; });
    f["estimator.gamma"] = number_field([](auto& c) -> auto& { return c.estimator.gamma; });
    f["estimator.gate_gamma"] =
        optional_field([](auto& c) -> auto& { return c.estimator.gate_gamma; });
    f["estimator.max_rejections"] =
        optional_field([](auto& c) -> auto& { return c.estimator.max_rejections; });
    f["estimator.iota"] = number_field([](auto& c) -> auto& { return c.estimator.iota; });
    f["estimator.xi"] = number_field([](auto& c) -> auto& { return c.estimator.xi; });
    f["estimator.sigma_o"] = number_field([](auto& c) -> auto& { return c.estimator.sigma_o; });
    f["estimator.bootstrap_iterations"] =
        count_field([](auto& c) -> auto& { return c.estimator.bootstrap_iterations; });
    f["estimator.mode"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto t = trim(v);
          if (t == "range-only") {
            c.estimator.mode = EstimatorMode::RangeOnly;
          } else if (t == "fused" || t == "range-orientation") {
            c.estimator.mode = EstimatorMode::RangeOrientation;
          } else {
            throw ConfigError("key '" + k + "': expected range-only or fused, got '" + v + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.estimator.mode == EstimatorMode::RangeOnly ? "range-only" : "fused");
        }};
    // lm.*
    f["lm.max_iterations"] = count_field([](auto& c) -> auto& { return c.estimator.lm.max_iterations; });
    f["lm.cost_threshold"] = number_field([](auto& c) -> auto& { return c.estimator.lm.cost_threshold; });
    f["lm.lambda_init"] = number_field([](auto& c) -> auto& { return c.estimator.lm.lambda_init; });
    f["lm.lambda_up"] = number_field([](auto& c) -> auto& { return c.estimator.lm.lambda_up; });
    f["lm.lambda_down"] = number_field([](auto& c) -> auto& { return c.estimator.lm.lambda_down; });
    f["lm.min_step_norm"] = number_field([](auto& c) -> auto& { return c.estimator.lm.min_step_norm; });
    f["lm.lambda_min"] = number_field([](auto& c) -> auto& { return c.estimator.lm.lambda_min; });
    f["lm.lambda_max"] = number_field([](auto& c) -> auto& { return c.estimator.lm.lambda_max; });
    f["lm.hessian"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto t = trim(v);
          if (t == "exact") {
            c.estimator.lm.hessian = HessianMode::Exact;
          } else if (t == "gauss-newton") {
            c.estimator.lm.hessian = HessianMode::GaussNewton;
          } else {
            throw ConfigError("key '" + k + "': expected exact or gauss-newton, got '" + v + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.estimator.lm.hessian == HessianMode::Exact ? "exact" : "gauss-newton");
        }};
    // sim.*
    f["sim.shape"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                        c.trajectory.shape = parse_shape(trim(v));
                      },
                      [](const RunConfig& c) { return std::string(to_string(c.trajectory.shape)); }};
    f["sim.center"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.trajectory.center = to_vec3(k, v);
                       },
                       [](const RunConfig& c) { return vec_text(c.trajectory.center); }};
    f["sim.radius"] = number_field([](auto& c) -> auto& { return c.trajectory.radius; });
    f["sim.width"] = number_field([](auto& c) -> auto& { return c.trajectory.width; });
    f["sim.height"] = number_field([](auto& c) -> auto& { return c.trajectory.height; });
    f["sim.helix_amplitude"] = number_field([](auto& c) -> auto& { return c.trajectory.helix_amplitude; });
    f["sim.helix_period"] = number_field([](auto& c) -> auto& { return c.trajectory.helix_period; });
    f["sim.speed"] = number_field([](auto& c) -> auto& { return c.trajectory.speed; });
    f["sim.duration"] = number_field([](auto& c) -> auto& { return c.trajectory.duration; });
    f["sim.tilt"] = number_field([](auto& c) -> auto& { return c.trajectory.tilt; });
    f["sim.tilt_period"] = number_field([](auto& c) -> auto& { return c.trajectory.tilt_period; });
    f["sim.waypoints"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.trajectory.waypoints.clear();
          for (const auto& p : split(v, ';')) {
            if (!p.empty()) c.trajectory.waypoints.push_back(to_vec3(k, p));
          }
        },
        [](const RunConfig& c) {
          std::string out;
          for (const auto& w : c.trajectory.waypoints) out += (out.empty() ? "" : "; ") + vec_text(w);
          return out;
        }};
    f["sim.imu_rate"] = number_field([](auto& c) -> auto& { return c.imu_rate; });
    f["sim.eta"] = optional_field([](auto& c) -> auto& { return c.sim_eta; });
    f["sim.noise"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const auto t = trim(v);
          if (t == "truncated-normal") {
            c.noise.kind = RangeNoiseKind::TruncatedNormal;
          } else if (t == "uniform") {
            c.noise.kind = RangeNoiseKind::Uniform;
          } else {
            throw ConfigError("key '" + k + "': expected truncated-normal or uniform, got '" + v + "'");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.noise.kind == RangeNoiseKind::Uniform ? "uniform" : "truncated-normal");
        }};
    f["sim.sigma_o"] = number_field([](auto& c) -> auto& { return c.noise.sigma_o; });
    f["sim.outliers"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.noise.outliers.clear();
          for (const auto& item : split(v, ';')) {
            if (item.empty()) continue;
            const auto parts = split(item, ':');
            if (parts.size() != 4) {
              throw ConfigError("key '" + k + "': expected 'anchor:start:end:bias', got '" + item + "'");
            }
            c.noise.outliers.push_back({static_cast<AnchorId>(to_u64(k, parts[0])), to_double(k, parts[1]),
                                        to_double(k, parts[2]), to_double(k, parts[3])});
          }
        },
        [](const RunConfig& c) {
          std::string out;
          for (const auto& o : c.noise.outliers) {
            out += (out.empty() ? "" : "; ") + std::to_string(o.anchor) + ":" + num(o.start) + ":" +
                   num(o.end) + ":" + num(o.bias);
          }
          return out;
        }};
    f["sim.anchors"] = string_field([](auto& c) -> auto& { return c.anchor_preset; });
    // paths.*
    f["paths.anchors"] = string_field([](auto& c) -> auto& { return c.paths.anchors; });
    f["paths.ranges"] = string_field([](auto& c) -> auto& { return c.paths.ranges; });
    f["paths.orientations"] = string_field([](auto& c) -> auto& { return c.paths.orientations; });
    f["paths.truth"] = string_field([](auto& c) -> auto& { return c.paths.truth; });
    f["paths.estimates"] = string_field([](auto& c) -> auto& { return c.paths.estimates; });
    f["paths.out"] = string_field([](auto& c) -> auto& { return c.paths.out; });
    // stability.*
    f["stability.samples"] = count_field([](auto& c) -> auto& { return c.stability.samples; });
    f["stability.trust_radius"] = number_field([](auto& c) -> auto& { return c.stability.trust_radius; });
    // bench.*
    f["bench.problems"] = count_field([](auto& c) -> auto& { return c.bench.problems; });
    f["seed"] = count_field([](auto& c) -> auto& { return c.seed; });
    return f;
  }();
  return fields;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(*this, key, value);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : registry()) out.push_back(k);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : registry()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::finalize() {
  trajectory.v_max = estimator.v_max;
  trajectory.rate = estimator.f;
  noise.eta = sim_eta.value_or(estimator.eta);
  estimator.seed = seed;
  stability.seed = seed;
  stability.eta = estimator.eta;
  stability.v_max = estimator.v_max;
  stability.xi = estimator.xi;
  stability.hessian = estimator.lm.hessian;

  estimator.validate();
  trajectory.validate();
  noise.validate();
  if (!(imu_rate > 0.0)) throw ConfigError("sim.imu_rate must be > 0");
  if (stability.samples < 1) throw ConfigError("stability.samples must be >= 1");
  if (!(stability.trust_radius >= 0.0)) throw ConfigError("stability.trust_radius must be >= 0");
  if (bench.problems < 1) throw ConfigError("bench.problems must be >= 1");
  if (paths.anchors.empty()) preset_anchors(anchor_preset);  // validates the preset name
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.anchor_preset = name;
  c.estimator.eta = kDefaultEta;
  c.estimator.f = kDefaultRangeRate;
  c.estimator.v_max = kDefaultVmax;
  c.imu_rate = kDefaultImuRate;
  if (name == "paper-indoor") {
    c.trajectory.shape = TrajectoryShape::Circle;
    c.trajectory.center = {0.0, 0.0, 1.2};
    c.trajectory.radius = 2.0;
    c.trajectory.speed = 0.5;
    c.trajectory.duration = 30.0;
  } else if (name == "paper-outdoor") {
    c.trajectory.shape = TrajectoryShape::Circle;
    c.trajectory.center = {3.0, 4.0, 2.5};
    c.trajectory.radius = 2.0;
    c.trajectory.speed = 0.5;
    c.trajectory.duration = 30.0;
  } else if (name == "static-test") {
    c.trajectory.shape = TrajectoryShape::Waypoints;
    c.trajectory.waypoints = {Vec3(0.12, 7.61, 0.23)};
    c.trajectory.duration = 50.0;
    c.noise.outliers = {{1, 10.0, 18.0, 1.0}, {1, 30.0, 37.0, 1.0}};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const ParseError&) {
    throw ConfigError("cannot read config file " + path);
  }
  apply_config_text(cfg, text, path);
}

}  // namespace rangeloc
