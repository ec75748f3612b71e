// Translation and rotation error metrics of an estimate stream.

#pragma once

#include <optional>
#include <vector>

#include "rangeloc/pipeline.hpp"
#include "rangeloc/sim.hpp"

namespace rangeloc {

struct CdfBin {
  double upper = 0.0;  ///< errors <= upper [m]
  std::size_t count = 0;  ///< errors in (upper - width, upper]
  double fraction = 0.0;  ///< cumulative
};

struct MetricsReport {
  std::size_t k = 0;
  double e_t = 0.0;     ///< mean |t_hat - t|
  double e_rmse = 0.0;  ///< sqrt(mean |t_hat - t|^2)
  std::optional<double> e_o;  ///< mean |R_hat R^-1 - I|_F
  Vec3 axis_mean = Vec3::Zero();  ///< mean |error| per axis
  std::vector<double> errors;     ///< per-step translation error
  std::vector<CdfBin> cdf;
  std::size_t rejections = 0;
  double mean_solve_seconds = 0.0;
};

/// |R_hat R^T - I|_F
double rotation_error(const Mat3& R_hat, const Mat3& R);

/// Cumulative distribution of errors on bins of the given width; the last
/// bin holds the largest error.
std::vector<CdfBin> error_cdf(const std::vector<double>& errors, double width = 0.01);

/// Pairs each estimate with the truth sample nearest in time (ties to the
/// earlier one). E_O is reported when every estimate carries a rotation.
/// Throws StreamError when either input is empty.
MetricsReport compute_metrics(const std::vector<Estimate>& estimates,
                              const std::vector<TruthSample>& truth, double cdf_width = 0.01);

}  // namespace rangeloc
