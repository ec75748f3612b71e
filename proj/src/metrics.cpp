#include "rangeloc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rangeloc/errors.hpp"

namespace rangeloc {

double rotation_error(const Mat3& R_hat, const Mat3& R) {
  return (R_hat * R.transpose() - Mat3::Identity()).norm();
}

std::vector<CdfBin> error_cdf(const std::vector<double>& errors, double width) {
  if (!(width > 0.0)) throw ConfigError("CDF bin width must be > 0");
  std::vector<CdfBin> out;
  if (errors.empty()) return out;
  const double top = *std::max_element(errors.begin(), errors.end());
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil(top / width - 1e-12)));
  out.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) out[b].upper = width * static_cast<double>(b + 1);
  for (double e : errors) {
    auto b = static_cast<std::size_t>(std::max(0.0, std::ceil(e / width - 1e-12) - 1.0));
    out[std::min(b, bins - 1)].count += 1;
  }
  std::size_t cum = 0;
  for (auto& bin : out) {
    cum += bin.count;
    bin.fraction = static_cast<double>(cum) / static_cast<double>(errors.size());
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<Estimate>& estimates,
                              const std::vector<TruthSample>& truth, double cdf_width) {
  if (estimates.empty() || truth.empty()) throw StreamError("metrics need estimates and truth");
  MetricsReport r;
  r.k = estimates.size();
  const bool rotations = std::all_of(estimates.begin(), estimates.end(),
                                     [](const Estimate& e) { return e.R.has_value(); });
  double sum = 0.0, sq = 0.0, rot = 0.0;
  for (const Estimate& e : estimates) {
    const auto it = std::lower_bound(truth.begin(), truth.end(), e.t,
                                     [](const TruthSample& s, double t) { return s.t < t; });
    std::size_t j = static_cast<std::size_t>(it - truth.begin());
    if (j == truth.size() || (j > 0 && e.t - truth[j - 1].t <= truth[j].t - e.t)) --j;
    const Vec3 d = e.p - truth[j].pose.t;
    const double n = d.norm();
    r.errors.push_back(n);
    sum += n;
    sq += n * n;
    r.axis_mean += d.cwiseAbs();
    if (rotations) rot += rotation_error(*e.R, truth[j].pose.R);
  }
  const double k = static_cast<double>(r.k);
  r.e_t = sum / k;
  r.e_rmse = std::sqrt(sq / k);
  r.axis_mean /= k;
  if (rotations) r.e_o = rot / k;
  r.cdf = error_cdf(r.errors, cdf_width);
  return r;
}

}  // namespace rangeloc
