// Levenberg-Marquardt minimization of graph costs.
//
// Translation graphs are solved directly in R^{3n} with analytic gradients
// and Hessians. Pose graphs are solved in global log coordinates: every free
// pose P_i is represented by eps_i = log_se3(P_i), the cost is minimized over
// the stacked eps vector and the result is mapped back with exp_se3.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rangeloc/block_tridiagonal.hpp"
#include "rangeloc/graph.hpp"

namespace rangeloc {

enum class HessianMode {
  Exact,       ///< full analytic Hessian, may be indefinite
  GaussNewton  ///< drops second derivatives of the residuals, always PSD
};

struct LmConfig {
  int max_iterations = 10;
  double cost_threshold = 1e-10;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.3;
  double min_step_norm = 1e-10;
  double lambda_min = 1e-12;
  double lambda_max = 1e12;
  HessianMode hessian = HessianMode::Exact;

  /// Throws ConfigError if a field is out of range.
  void validate() const;
};

/// Symmetric approximation of the Hessian over the free-node state. Chain
/// graphs use the block-tridiagonal layout; anything else falls back to a
/// dense matrix.
class HessianApprox {
 public:
  HessianApprox() = default;
  HessianApprox(std::size_t num_blocks, int block_size, bool banded);

  bool is_banded() const { return banded_; }
  int block_size() const { return block_; }
  std::size_t num_blocks() const { return blocks_; }
  std::size_t dimension() const { return blocks_ * static_cast<std::size_t>(block_); }

  /// Accumulates `m` into block (r, c) and its transpose into (c, r).
  /// Requires |r - c| <= 1 in banded mode.
  void add_block(std::size_t r, std::size_t c, const Eigen::MatrixXd& m);

  std::size_t structural_nonzeros() const;
  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;

  const BlockTridiagonal& banded() const { return band_; }

  /// Solves (B + lambda I) x = rhs; nullopt when the damped matrix is not
  /// positive definite.
  std::optional<Eigen::VectorXd> solve_damped(double lambda, const Eigen::VectorXd& rhs) const;

 private:
  bool banded_ = true;
  int block_ = 3;
  std::size_t blocks_ = 0;
  BlockTridiagonal band_;
  Eigen::MatrixXd dense_;
};

struct SolveReport {
  int iterations = 0;
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double final_gradient_norm = 0.0;
  std::vector<double> lambdas;             ///< damping used by each iteration
  std::vector<double> iteration_seconds;   ///< wall time of each iteration
  std::vector<double> step_residuals;      ///< |(B + lambda I) d + grad| per solved step
  bool converged = false;
  std::string termination;  ///< "cost-threshold", "step-norm", "max-iterations", "lambda-limit"
  double wall_time_seconds = 0.0;
  std::size_t skipped_factors = 0;  ///< range factors skipped for singular geometry
};

/// Gradient of total_cost with respect to the translation state.
/// `skipped`, when given, counts range factors dropped for robot-on-anchor.
Eigen::VectorXd assemble_gradient(const FactorGraph& g, const TranslationState& x,
                                  std::size_t* skipped = nullptr);

/// Hessian of total_cost (or its Gauss-Newton part) for the translation state.
HessianApprox assemble_hessian(const FactorGraph& g, const TranslationState& x,
                               HessianMode mode = HessianMode::Exact,
                               std::size_t* skipped = nullptr);

/// Step of (B + lambda I) step = -gradient; nullopt if the damped matrix is
/// not positive definite.
std::optional<Eigen::VectorXd> sparse_solve(const HessianApprox& B, double lambda,
                                            const Eigen::VectorXd& gradient);

struct TranslationSolution {
  TranslationState x;
  SolveReport report;
};

TranslationSolution lm_minimize(const FactorGraph& g, const TranslationState& x0, const LmConfig& cfg);

/// Stacked log coordinates of a pose state.
Eigen::VectorXd pose_state_to_log(const PoseState& poses);
PoseState pose_state_from_log(const Eigen::VectorXd& eps);

/// Cost, gradient and Gauss-Newton Hessian of a pose graph in log
/// coordinates. Residual Jacobians are central differences in eps.
double total_cost_log(const FactorGraph& g, const Eigen::VectorXd& eps);
Eigen::VectorXd assemble_gradient_log(const FactorGraph& g, const Eigen::VectorXd& eps);
HessianApprox assemble_hessian_log(const FactorGraph& g, const Eigen::VectorXd& eps);

struct PoseSolution {
  PoseState poses;
  SolveReport report;
};

/// Throws PoseChartError when a rotation coordinate approaches |omega| = 2 pi,
/// where the exponential map stops being a local chart.
PoseSolution lm_minimize_pose(const FactorGraph& g, const PoseState& P0, const LmConfig& cfg);

}  // namespace rangeloc
