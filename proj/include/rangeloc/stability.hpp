// Stability diagnostics of a translation window: curvature extremes over a
// feasible set, the damped-Hessian norm mu, the stability parameter alpha and
// the resulting error bound.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rangeloc/graph.hpp"
#include "rangeloc/solver.hpp"

namespace rangeloc {

/// Set of window trajectories the diagnostics sample from. Every node must
/// satisfy |t_i - a_i| <= d_i + eta and |t_i - t_{i-1}| <= v_max * T. The
/// trust radius additionally keeps each node within that distance of the
/// linearization point, which keeps the set away from the anchors where the
/// range Hessian is unbounded.
struct FeasibleSetSpec {
  std::vector<Vec3> anchors;  ///< anchor of each free node's range factor
  std::vector<double> ranges;
  double eta = 0.0;
  double v_max = 1.0;
  double T = 0.0;             ///< largest time step in the window
  double trust_radius = 0.25;

  bool contains(const Eigen::VectorXd& x, const Eigen::VectorXd& x_bar) const;

  /// Reads anchors, ranges and T from a translation chain graph. Throws
  /// GraphError if a free node lacks a range factor.
  static FeasibleSetSpec from_graph(const FactorGraph& g, double eta, double v_max,
                                    double trust_radius);
};

struct DeltaBounds {
  double delta_s = 0.0;
  double delta_l = 0.0;
  std::size_t samples_used = 0;
  std::size_t proposals = 0;
  bool inner_approximation = true;
};

/// Monte-Carlo estimate of min / max of |Hessian(theta t + (1 - theta) x_bar)|_2
/// over feasible t and theta in [0, 1]. x_bar and every probe are always
/// evaluated, and every accepted t at theta = 1 as well as a uniform theta.
/// Throws SamplingFailure when fewer than 0.1% of proposals land
/// in the set.
DeltaBounds estimate_delta_bounds(const FactorGraph& g, const Eigen::VectorXd& x_bar,
                                  const FeasibleSetSpec& spec, std::size_t samples,
                                  std::uint64_t seed,
                                  const std::vector<Eigen::VectorXd>& probes = {});

/// Largest singular value of a linear operator by power iteration on A^T A.
double spectral_norm(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                     Eigen::Index dim, int max_iterations = 200, double rel_tol = 1e-8);
double spectral_norm(const Eigen::MatrixXd& A, int max_iterations = 200, double rel_tol = 1e-8);

struct AlphaResult {
  double mu = 0.0;
  double alpha = 0.0;
};

/// mu = |B + lambda I|_2, alpha = max(|1 - delta_s / mu|, |1 - delta_l / mu|).
AlphaResult compute_alpha(double delta_s, double delta_l, const HessianApprox& B, double lambda);
double alpha_from(double delta_s, double delta_l, double mu);

struct StabilityReport {
  std::size_t step = 0;
  double delta_s = 0.0;
  double delta_l = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;        ///< |eta_N| / mu, measured at the truth when given
  double beta_proof = 0.0;  ///< (3N - 1) xi / mu
  double c = 0.0;
  double lambda = 0.0;
  std::optional<double> bound;  ///< from beta; set iff alpha < 1
  std::size_t samples_used = 0;
  bool beta_from_truth = false;
  bool inner_approximation = true;
};

/// beta / (1 - alpha) + alpha c / (1 - alpha); nullopt when alpha >= 1.
std::optional<double> asymptotic_bound(double alpha, double beta, double c);

struct DiagnoseOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double eta = 0.2;
  double v_max = 1.0;
  double trust_radius = 0.25;
  double xi = 1.0;
  HessianMode hessian = HessianMode::Exact;
};

/// Full diagnosis of one window linearized at x_bar with damping lambda.
/// When the true window trajectory is given, beta uses the gradient of the
/// cost there; otherwise the worst case (3N - 1) xi / mu.
StabilityReport diagnose_window(const FactorGraph& g, const Eigen::VectorXd& x_bar, double lambda,
                                const DiagnoseOptions& opt,
                                const std::optional<Eigen::VectorXd>& truth = std::nullopt);

struct ErrorBound {
  bool defined = false;
  std::optional<std::size_t> offending_step;  ///< first step with alpha >= 1
  double alpha = 0.0;
  double beta = 0.0;
  double c = 0.0;
  std::optional<double> asymptotic;
  std::optional<double> finite;  ///< after all reported steps, given |e_N|
};

enum class BetaSource {
  Proof,    ///< beta_proof, from the worst-case gradient norm (3N - 1) xi
  Measured  ///< beta, from the gradient at the true trajectory
};

/// Aggregates per-step reports with the maxima of alpha, beta and c.
ErrorBound error_bound(const std::vector<StabilityReport>& reports,
                       std::optional<double> initial_error = std::nullopt,
                       BetaSource source = BetaSource::Proof);

/// alpha^n e0 + beta sum_{i<n} alpha^i + c sum_{i<n} alpha^{i+1}
double finite_bound(double alpha, double beta, double c, double e0, std::size_t n);

}  // namespace rangeloc
