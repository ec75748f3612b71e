#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rangeloc/commands.hpp"
#include "rangeloc/config.hpp"
#include "rangeloc/errors.hpp"
#include "rangeloc/lie.hpp"
#include "rangeloc/metrics.hpp"
#include "rangeloc/sim.hpp"

namespace py = pybind11;
using namespace rangeloc;

namespace {

using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Table anchor_table(const AnchorSet& anchors) {
  Table out(static_cast<Eigen::Index>(anchors.size()), 4);
  Eigen::Index r = 0;
  for (const Anchor& a : anchors.anchors()) {
    out.row(r++) << a.id, a.p.x(), a.p.y(), a.p.z();
  }
  return out;
}

AnchorSet anchors_from(const Table& t) {
  if (t.cols() != 4) throw ParseError("anchors need 4 columns: id, x, y, z");
  AnchorSet a;
  for (Eigen::Index r = 0; r < t.rows(); ++r) a.add({static_cast<AnchorId>(t(r, 0)), Vec3(t(r, 1), t(r, 2), t(r, 3))});
  return a;
}

Table range_table(const std::vector<RangeMeasurement>& ranges) {
  Table out(static_cast<Eigen::Index>(ranges.size()), 3);
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) << ranges[i].t, ranges[i].anchor, ranges[i].d;
  }
  return out;
}

std::vector<RangeMeasurement> ranges_from(const Table& t) {
  if (t.rows() > 0 && t.cols() != 3) throw ParseError("ranges need 3 columns: t, anchor, d");
  std::vector<RangeMeasurement> out;
  for (Eigen::Index r = 0; r < t.rows(); ++r) out.push_back({t(r, 0), static_cast<AnchorId>(t(r, 1)), t(r, 2)});
  return out;
}

Table orientation_table(const std::vector<OrientationMeasurement>& ori) {
  Table out(static_cast<Eigen::Index>(ori.size()), 10);
  for (std::size_t i = 0; i < ori.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out(r, 0) = ori[i].t;
    for (int k = 0; k < 9; ++k) out(r, 1 + k) = ori[i].R(k / 3, k % 3);
  }
  return out;
}

std::vector<OrientationMeasurement> orientations_from(const Table& t) {
  if (t.rows() > 0 && t.cols() != 10) throw ParseError("orientations need 10 columns: t and 9 row-major values");
  std::vector<OrientationMeasurement> out;
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    OrientationMeasurement o;
    o.t = t(r, 0);
    for (int k = 0; k < 9; ++k) o.R(k / 3, k % 3) = t(r, 1 + k);
    out.push_back(o);
  }
  return out;
}

/// Rows of t, x, y, z.
Table truth_table(const std::vector<TruthSample>& truth) {
  Table out(static_cast<Eigen::Index>(truth.size()), 4);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) << truth[i].t, truth[i].pose.t.transpose();
  }
  return out;
}

std::vector<TruthSample> truth_from(const Table& t) {
  if (t.cols() != 4) throw ParseError("truth needs 4 columns: t, x, y, z");
  std::vector<TruthSample> out;
  for (Eigen::Index r = 0; r < t.rows(); ++r) out.push_back({t(r, 0), Pose{Mat3::Identity(), Vec3(t(r, 1), t(r, 2), t(r, 3))}});
  return out;
}

Table estimate_table(const std::vector<Estimate>& est) {
  Table out(static_cast<Eigen::Index>(est.size()), 4);
  for (std::size_t i = 0; i < est.size(); ++i) out.row(static_cast<Eigen::Index>(i)) << est[i].t, est[i].p.transpose();
  return out;
}

RunConfig finalized(RunConfig cfg, std::optional<std::uint64_t> seed) {
  if (seed) cfg.seed = *seed;
  cfg.finalize();
  return cfg;
}

py::dict simulate(const RunConfig& config, std::optional<std::uint64_t> seed) {
  const RunConfig cfg = finalized(config, seed);
  const AnchorSet anchors = preset_anchors(cfg.anchor_preset);
  const Trajectory traj(cfg.trajectory);
  const auto truth = traj.sample(cfg.estimator.f);
  py::dict out;
  out["anchors"] = anchor_table(anchors);
  out["ranges"] = range_table(simulate_ranges(truth, anchors, cfg.noise, cfg.seed));
  out["orientations"] = orientation_table(simulate_orientation(traj, cfg.imu_rate, cfg.noise, cfg.seed + 1));
  out["truth"] = truth_table(truth);
  return out;
}

py::dict localize(const RunConfig& config, const Table& anchors, const Table& ranges,
                  std::optional<Table> orientations) {
  const RunConfig cfg = finalized(config, std::nullopt);
  const AnchorSet a = anchors_from(anchors);
  require_geometry(a);
  const LocalizationRun run = run_localization(cfg.estimator, a, ranges_from(ranges),
                                               orientations ? orientations_from(*orientations)
                                                            : std::vector<OrientationMeasurement>{});
  py::dict out;
  out["estimates"] = estimate_table(run.estimates);
  py::list rotations;
  for (const auto& e : run.estimates) {
    if (e.R) rotations.append(Mat3(*e.R));
  }
  out["rotations"] = rotations;
  out["rejections"] = run.rejections;
  out["restarts"] = run.restarts;
  out["warnings"] = run.warnings;
  return out;
}

py::dict metrics(const Table& estimates, const Table& truth) {
  std::vector<Estimate> est;
  for (Eigen::Index r = 0; r < estimates.rows(); ++r) {
    Estimate e;
    e.t = estimates(r, 0);
    e.p = Vec3(estimates(r, 1), estimates(r, 2), estimates(r, 3));
    est.push_back(e);
  }
  const MetricsReport m = compute_metrics(est, truth_from(truth));
  py::dict out;
  out["k"] = m.k;
  out["E_T"] = m.e_t;
  out["E_RMSE"] = m.e_rmse;
  out["axis_mean"] = m.axis_mean;
  out["errors"] = m.errors;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sliding-window range-only and range-orientation localization.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<InsufficientGeometry>(m, "InsufficientGeometry", base.ptr());
  py::register_exception<InvalidRotation>(m, "InvalidRotation", base.ptr());
  py::register_exception<StreamError>(m, "StreamError", base.ptr());

  m.def("exp_so3", [](const Vec3& w) { return exp_so3(w); }, py::arg("omega"));
  m.def("log_so3", [](const Mat3& R) { return Vec3(log_so3(R)); }, py::arg("R"));
  m.def("exp_se3", [](const Vec6& eps) { return exp_se3(eps).matrix(); }, py::arg("epsilon"),
        "4x4 homogeneous transform of the twist (rotation first, then translation).");
  m.def("log_se3", [](const Mat4& T) {
    return Vec6(log_se3(Pose{T.topLeftCorner<3, 3>(), T.topRightCorner<3, 1>()}));
  }, py::arg("T"));
  m.def("pseudo_huber", [](double r, double xi) {
    const LossValue v = pseudo_huber(r, xi);
    return py::make_tuple(v.value, v.derivative);
  }, py::arg("r"), py::arg("xi") = 1.0, "Loss value and derivative.");

  py::class_<RunConfig>(m, "Config")
      .def(py::init([](const std::string& preset) { return preset_config(preset); }),
           py::arg("preset") = "paper-indoor")
      .def("set", &RunConfig::set, py::arg("key"), py::arg("value"))
      .def("apply_text", [](RunConfig& c, const std::string& text) { apply_config_text(c, text); })
      .def("to_text", &RunConfig::to_text)
      .def_static("keys", &RunConfig::keys)
      .def_readwrite("seed", &RunConfig::seed);

  m.def("preset_names", &preset_names);
  m.def("preset_anchors", [](const std::string& name) { return anchor_table(preset_anchors(name)); });
  m.def("simulate", &simulate, py::arg("config"), py::arg("seed") = py::none(),
        "Anchors (id, x, y, z), ranges (t, anchor, d), orientations (t, R row-major) and truth (t, x, y, z).");
  m.def("localize", &localize, py::arg("config"), py::arg("anchors"), py::arg("ranges"),
        py::arg("orientations") = py::none());
  m.def("metrics", &metrics, py::arg("estimates"), py::arg("truth"));
}
