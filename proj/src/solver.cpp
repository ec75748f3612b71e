#include "rangeloc/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>

#include "overloaded.hpp"
#include "rangeloc/errors.hpp"

namespace rangeloc {

void LmConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("lm.max_iterations must be >= 1");
  if (!(cost_threshold >= 0.0)) throw ConfigError("lm.cost_threshold must be >= 0");
  if (!(lambda_init > 0.0)) throw ConfigError("lm.lambda_init must be > 0");
  if (!(lambda_up > 1.0)) throw ConfigError("lm.lambda_up must be > 1");
  if (!(lambda_down > 0.0 && lambda_down < 1.0)) throw ConfigError("lm.lambda_down must be in (0, 1)");
  if (!(min_step_norm >= 0.0)) throw ConfigError("lm.min_step_norm must be >= 0");
  if (!(lambda_min > 0.0 && lambda_min <= lambda_max)) throw ConfigError("lm lambda clamp is invalid");
}

// ---------------------------------------------------------------------------
// HessianApprox

HessianApprox::HessianApprox(std::size_t num_blocks, int block_size, bool banded)
    : banded_(banded), block_(block_size), blocks_(num_blocks) {
  if (banded_) {
    band_ = BlockTridiagonal(num_blocks, block_size);
  } else {
    dense_ = Eigen::MatrixXd::Zero(dimension(), dimension());
  }
}

void HessianApprox::add_block(std::size_t r, std::size_t c, const Eigen::MatrixXd& m) {
  if (banded_) {
    if (r == c) {
      band_.diag(r) += m;
    } else if (r == c + 1) {
      band_.lower(r) += m;
    } else if (c == r + 1) {
      band_.lower(c) += m.transpose();
    } else {
      throw GraphError("HessianApprox: block outside the tridiagonal band");
    }
    return;
  }
  const Eigen::Index b = block_;
  const auto ri = static_cast<Eigen::Index>(r) * b;
  const auto ci = static_cast<Eigen::Index>(c) * b;
  dense_.block(ri, ci, b, b) += m;
  if (r != c) dense_.block(ci, ri, b, b) += m.transpose();
}

std::size_t HessianApprox::structural_nonzeros() const {
  if (banded_) return band_.structural_nonzeros();
  return static_cast<std::size_t>((dense_.array() != 0.0).count());
}

Eigen::MatrixXd HessianApprox::to_dense() const { return banded_ ? band_.to_dense() : dense_; }

Eigen::VectorXd HessianApprox::multiply(const Eigen::VectorXd& v) const {
  return banded_ ? band_.multiply(v) : Eigen::VectorXd(dense_ * v);
}

std::optional<Eigen::VectorXd> HessianApprox::solve_damped(double lambda,
                                                           const Eigen::VectorXd& rhs) const {
  if (banded_) {
    BlockTridiagonal damped = band_;
    damped.add_to_diagonal(lambda);
    return damped.solve(rhs);
  }
  Eigen::MatrixXd damped = dense_;
  damped.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(damped);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd x = llt.solve(rhs);
  if (!x.allFinite()) return std::nullopt;
  return x;
}

std::optional<Eigen::VectorXd> sparse_solve(const HessianApprox& B, double lambda,
                                            const Eigen::VectorXd& gradient) {
  auto x = B.solve_damped(lambda, -gradient);
  return x;
}

// ---------------------------------------------------------------------------
// Shared accumulation

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// One node touched by a linearized edge: its free slot (if any) and the
/// Jacobian of the edge residual with respect to that node's block.
struct Touch {
  std::optional<std::size_t> slot;
  Eigen::MatrixXd J;
};

void accumulate(const std::vector<Touch>& touches, const Eigen::VectorXd& g_e,
                const Eigen::MatrixXd& H_e, Eigen::VectorXd& gradient, HessianApprox* H,
                int block) {
  for (std::size_t a = 0; a < touches.size(); ++a) {
    if (!touches[a].slot) continue;
    const auto sa = *touches[a].slot;
    gradient.segment(static_cast<Eigen::Index>(sa) * block, block).noalias() +=
        touches[a].J.transpose() * g_e;
    if (H == nullptr) continue;
    const Eigen::MatrixXd JaT_H = touches[a].J.transpose() * H_e;
    for (std::size_t b = 0; b <= a; ++b) {
      if (!touches[b].slot) continue;
      H->add_block(sa, *touches[b].slot, JaT_H * touches[b].J);
    }
  }
}

/// Gradient and Hessian of s * rho(sqrt(e^T W e)) with respect to e.
void robust_vector_derivatives(const Eigen::VectorXd& e, double s, const Eigen::MatrixXd& W,
                               double xi, Eigen::VectorXd& g_e, Eigen::MatrixXd& H_e) {
  const Eigen::VectorXd We = W * e;
  const double q = std::max(0.0, e.dot(We));
  const double a = 1.0 / std::sqrt(1.0 + q / (xi * xi));
  g_e = s * a * We;
  H_e = s * (a * W - (a * a * a / (xi * xi)) * We * We.transpose());
}

// ---------------------------------------------------------------------------
// Translation graphs: analytic derivatives

Vec3 translation_of(const FactorGraph& g, NodeId id, const TranslationState& x,
                    std::optional<std::size_t>& slot) {
  slot = g.slot_of(id);
  if (slot) return x.segment<3>(3 * static_cast<Eigen::Index>(*slot));
  return g.find(id)->value.t;
}

void linearize_translation(const FactorGraph& g, const TranslationState& x, HessianMode mode,
                           Eigen::VectorXd& gradient, HessianApprox* H, std::size_t& skipped) {
  if (g.mode() != GraphMode::Translation) {
    throw GraphError("translation derivatives requested for a pose graph");
  }
  if (static_cast<std::size_t>(x.size()) != g.state_dimension()) {
    throw GraphError("state dimension does not match the graph");
  }
  gradient = Eigen::VectorXd::Zero(x.size());
  skipped = 0;
  const Mat3 I = Mat3::Identity();

  for (const Edge& edge : g.edges()) {
    std::visit(
        Overloaded{
            [&](const RangeEdge& e) {
              std::optional<std::size_t> s;
              const Vec3 t = translation_of(g, e.node, x, s);
              if (!s) return;
              const Vec3 diff = t - e.factor.anchor;
              const double dist = diff.norm();
              if (dist < kSingularDistance) {
                ++skipped;
                return;
              }
              const double xi2 = e.factor.loss.xi * e.factor.loss.xi;
              const double m = e.factor.d - dist;
              const double root = std::sqrt(1.0 + m * m / xi2);
              const double y = m / root;                 // rho'(m)
              const double l = 1.0 / (root * root * root);  // rho''(m)
              const Vec3 grad_h = diff / dist;
              const double w = e.factor.w_r;
              gradient.segment<3>(3 * static_cast<Eigen::Index>(*s)) -= w * y * grad_h;
              if (H == nullptr) return;
              Mat3 block = w * l * grad_h * grad_h.transpose();
              if (mode == HessianMode::Exact) {
                const Mat3 hess_h = (I - grad_h * grad_h.transpose()) / dist;
                block -= w * y * hess_h;
              }
              H->add_block(*s, *s, block);
            },
            [&](const SmoothnessEdge& e) {
              std::optional<std::size_t> sp, sc;
              const Vec3 tp = translation_of(g, e.prev, x, sp);
              const Vec3 tc = translation_of(g, e.curr, x, sc);
              if (!sp && !sc) return;
              const Vec3 delta = tc - tp;
              const double xi2 = e.factor.loss.xi * e.factor.loss.xi;
              const double n2 = delta.squaredNorm();
              const double root = std::sqrt(1.0 + n2 / xi2);
              const double w = e.factor.w_s;
              const Vec3 z = delta / root;
              if (sc) gradient.segment<3>(3 * static_cast<Eigen::Index>(*sc)) += w * z;
              if (sp) gradient.segment<3>(3 * static_cast<Eigen::Index>(*sp)) -= w * z;
              if (H == nullptr) return;
              const Mat3 X = w * ((xi2 + n2) * I - delta * delta.transpose()) /
                             (xi2 * root * root * root);
              if (sc) H->add_block(*sc, *sc, X);
              if (sp) H->add_block(*sp, *sp, X);
              if (sc && sp) H->add_block(*sc, *sp, -X);
            },
            [&](const RelTranslationEdge& e) {
              std::optional<std::size_t> si, sj;
              const Vec3 ti = translation_of(g, e.i, x, si);
              const Vec3 tj = translation_of(g, e.j, x, sj);
              const Eigen::VectorXd r = rel_translation_residual(ti, tj, e.factor);
              Eigen::VectorXd g_e;
              Eigen::MatrixXd H_e;
              robust_vector_derivatives(r, 1.0, e.factor.W, e.factor.loss.xi, g_e, H_e);
              const std::vector<Touch> touches{{si, -Eigen::MatrixXd::Identity(3, 3)},
                                               {sj, Eigen::MatrixXd::Identity(3, 3)}};
              accumulate(touches, g_e, H_e, gradient, H, 3);
            },
            [&](const auto&) {
              throw GraphError("rotation-dependent edge in a translation graph");
            },
        },
        edge);
  }
}

// ---------------------------------------------------------------------------
// Pose graphs: log coordinates, numeric residual Jacobians, Gauss-Newton

struct EdgeResidual {
  Eigen::VectorXd e;
  double scale = 1.0;
  Eigen::MatrixXd W;
  double xi = 1.0;
};

EdgeResidual pose_edge_residual(const Edge& edge, const std::vector<Pose>& p) {
  return std::visit(
      Overloaded{
          [&](const RangeEdge& e) {
            Eigen::VectorXd r(1);
            r[0] = e.factor.d - (p[0].t - e.factor.anchor).norm();
            return EdgeResidual{r, e.factor.w_r, Eigen::MatrixXd::Identity(1, 1), e.factor.loss.xi};
          },
          [&](const SmoothnessEdge& e) {
            // rho(|delta|) is smooth in delta, |delta| alone is not.
            const Eigen::VectorXd r = p[1].t - p[0].t;
            return EdgeResidual{r, e.factor.w_s, Eigen::MatrixXd::Identity(3, 3), e.factor.loss.xi};
          },
          [&](const RelTranslationEdge& e) {
            const Eigen::VectorXd r = rel_translation_residual(p[0].t, p[1].t, e.factor);
            return EdgeResidual{r, 1.0, e.factor.W, e.factor.loss.xi};
          },
          [&](const RelRotationEdge& e) {
            const Eigen::VectorXd r = rel_rotation_residual(p[0].R, p[1].R, e.factor);
            return EdgeResidual{r, 1.0, e.factor.W, e.factor.loss.xi};
          },
          [&](const RelTransformEdge& e) {
            const Eigen::VectorXd r = rel_transform_residual(p[0], p[1], e.factor);
            return EdgeResidual{r, 1.0, e.factor.W, e.factor.loss.xi};
          },
          [&](const PoseSmoothnessEdge& e) {
            const Eigen::VectorXd r = pose_smoothness_residual(p[1], p[0], e.factor);
            return EdgeResidual{r, 1.0, e.factor.W, e.factor.loss.xi};
          },
      },
      edge);
}

void check_dimension_log(const FactorGraph& g, const Eigen::VectorXd& eps) {
  if (static_cast<std::size_t>(eps.size()) != 6 * g.num_free()) {
    throw GraphError("log-coordinate state dimension does not match the graph");
  }
}

void linearize_pose(const FactorGraph& g, const Eigen::VectorXd& eps, Eigen::VectorXd& gradient,
                    HessianApprox* H) {
  check_dimension_log(g, eps);
  gradient = Eigen::VectorXd::Zero(eps.size());
  const PoseState poses = pose_state_from_log(eps);

  for (const Edge& edge : g.edges()) {
    const auto ids = nodes_of(edge);
    std::vector<std::optional<std::size_t>> slots(ids.size());
    std::vector<Pose> p(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      slots[k] = g.slot_of(ids[k]);
      p[k] = slots[k] ? poses[*slots[k]] : g.find(ids[k])->value;
    }
    if (std::none_of(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); })) {
      continue;
    }
    const EdgeResidual r0 = pose_edge_residual(edge, p);
    const Eigen::Index m = r0.e.size();

    std::vector<Touch> touches;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Touch touch{slots[k], Eigen::MatrixXd::Zero(m, 6)};
      if (slots[k]) {
        const Vec6 base = eps.segment<6>(6 * static_cast<Eigen::Index>(*slots[k]));
        std::vector<Pose> pp = p;
        for (int c = 0; c < 6; ++c) {
          const double h = 1e-6 * std::max(1.0, std::abs(base[c]));
          Vec6 plus = base, minus = base;
          plus[c] += h;
          minus[c] -= h;
          pp[k] = exp_se3(plus);
          const Eigen::VectorXd ep = pose_edge_residual(edge, pp).e;
          pp[k] = exp_se3(minus);
          const Eigen::VectorXd em = pose_edge_residual(edge, pp).e;
          touch.J.col(c) = (ep - em) / (2.0 * h);
        }
      }
      touches.push_back(std::move(touch));
    }
    Eigen::VectorXd g_e;
    Eigen::MatrixXd H_e;
    robust_vector_derivatives(r0.e, r0.scale, r0.W, r0.xi, g_e, H_e);
    accumulate(touches, g_e, H_e, gradient, H, 6);
  }
}

// ---------------------------------------------------------------------------
// Generic Levenberg-Marquardt loop over a Euclidean parameter vector

struct LmProblem {
  std::function<double(const Eigen::VectorXd&)> cost;
  /// Fills gradient and Hessian; returns the number of skipped factors.
  std::function<std::size_t(const Eigen::VectorXd&, Eigen::VectorXd&, HessianApprox&)> linearize;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<void(const Eigen::VectorXd&)> check_step;
};

Eigen::VectorXd run_lm(const LmProblem& problem, const Eigen::VectorXd& x0, const LmConfig& cfg,
                       SolveReport& report) {
  cfg.validate();
  const auto start = Clock::now();
  Eigen::VectorXd x = x0;
  double F = problem.cost(x);
  report = SolveReport{};
  report.initial_cost = F;
  report.termination = "max-iterations";
  double lambda = std::clamp(cfg.lambda_init, cfg.lambda_min, cfg.lambda_max);

  if (F < cfg.cost_threshold || x.size() == 0) {
    report.converged = true;
    report.termination = "cost-threshold";
  } else {
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const auto it_start = Clock::now();
      Eigen::VectorXd grad;
      HessianApprox B;
      report.skipped_factors += problem.linearize(x, grad, B);

      std::optional<Eigen::VectorXd> step = sparse_solve(B, lambda, grad);
      while (!step && lambda < cfg.lambda_max) {
        lambda = std::min(lambda * cfg.lambda_up, cfg.lambda_max);
        step = sparse_solve(B, lambda, grad);
      }
      if (!step) {
        report.termination = "lambda-limit";
        report.iteration_seconds.push_back(seconds_since(it_start));
        break;
      }
      report.lambdas.push_back(lambda);
      report.step_residuals.push_back((B.multiply(*step) + lambda * *step + grad).norm());

      const Eigen::VectorXd candidate = x + *step;
      if (problem.check_step) problem.check_step(candidate);
      const double F_new = problem.cost(candidate);
      ++report.iterations;
      if (std::isfinite(F_new) && F_new < F) {
        x = candidate;
        F = F_new;
        ++report.accepted_steps;
        lambda = std::max(lambda * cfg.lambda_down, cfg.lambda_min);
      } else {
        lambda = std::min(lambda * cfg.lambda_up, cfg.lambda_max);
      }
      report.iteration_seconds.push_back(seconds_since(it_start));

      if (F < cfg.cost_threshold) {
        report.converged = true;
        report.termination = "cost-threshold";
        break;
      }
      if (step->norm() < cfg.min_step_norm) {
        report.converged = true;
        report.termination = "step-norm";
        break;
      }
    }
  }
  report.final_cost = F;
  report.final_gradient_norm = x.size() > 0 ? problem.gradient(x).norm() : 0.0;
  report.wall_time_seconds = seconds_since(start);
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

Eigen::VectorXd assemble_gradient(const FactorGraph& g, const TranslationState& x,
                                  std::size_t* skipped) {
  Eigen::VectorXd grad;
  std::size_t n = 0;
  linearize_translation(g, x, HessianMode::Exact, grad, nullptr, n);
  if (skipped) *skipped = n;
  return grad;
}

HessianApprox assemble_hessian(const FactorGraph& g, const TranslationState& x, HessianMode mode,
                               std::size_t* skipped) {
  HessianApprox H(g.num_free(), 3, g.is_chain());
  Eigen::VectorXd grad;
  std::size_t n = 0;
  linearize_translation(g, x, mode, grad, &H, n);
  if (skipped) *skipped = n;
  return H;
}

TranslationSolution lm_minimize(const FactorGraph& g, const TranslationState& x0, const LmConfig& cfg) {
  if (static_cast<std::size_t>(x0.size()) != g.state_dimension()) {
    throw GraphError("lm_minimize: initial state dimension does not match the graph");
  }
  const bool chain = g.is_chain();
  LmProblem problem;
  problem.cost = [&](const Eigen::VectorXd& x) { return total_cost(g, x); };
  problem.linearize = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad, HessianApprox& H) {
    H = HessianApprox(g.num_free(), 3, chain);
    std::size_t skipped = 0;
    linearize_translation(g, x, cfg.hessian, grad, &H, skipped);
    return skipped;
  };
  problem.gradient = [&](const Eigen::VectorXd& x) { return assemble_gradient(g, x); };

  TranslationSolution out;
  out.x = run_lm(problem, x0, cfg, out.report);
  return out;
}

Eigen::VectorXd pose_state_to_log(const PoseState& poses) {
  Eigen::VectorXd eps(6 * static_cast<Eigen::Index>(poses.size()));
  for (std::size_t i = 0; i < poses.size(); ++i) {
    eps.segment<6>(6 * static_cast<Eigen::Index>(i)) = log_se3(poses[i]);
  }
  return eps;
}

PoseState pose_state_from_log(const Eigen::VectorXd& eps) {
  PoseState poses(static_cast<std::size_t>(eps.size() / 6));
  for (std::size_t i = 0; i < poses.size(); ++i) {
    poses[i] = exp_se3(eps.segment<6>(6 * static_cast<Eigen::Index>(i)));
  }
  return poses;
}

double total_cost_log(const FactorGraph& g, const Eigen::VectorXd& eps) {
  check_dimension_log(g, eps);
  return total_cost(g, pose_state_from_log(eps));
}

Eigen::VectorXd assemble_gradient_log(const FactorGraph& g, const Eigen::VectorXd& eps) {
  Eigen::VectorXd grad;
  linearize_pose(g, eps, grad, nullptr);
  return grad;
}

HessianApprox assemble_hessian_log(const FactorGraph& g, const Eigen::VectorXd& eps) {
  HessianApprox H(g.num_free(), 6, g.is_chain());
  Eigen::VectorXd grad;
  linearize_pose(g, eps, grad, &H);
  return H;
}

PoseSolution lm_minimize_pose(const FactorGraph& g, const PoseState& P0, const LmConfig& cfg) {
  if (P0.size() != g.num_free()) {
    throw GraphError("lm_minimize_pose: initial state size does not match the graph");
  }
  const bool chain = g.is_chain();
  LmProblem problem;
  problem.cost = [&](const Eigen::VectorXd& eps) { return total_cost_log(g, eps); };
  problem.linearize = [&](const Eigen::VectorXd& eps, Eigen::VectorXd& grad, HessianApprox& H) {
    H = HessianApprox(g.num_free(), 6, chain);
    linearize_pose(g, eps, grad, &H);
    return std::size_t{0};
  };
  problem.gradient = [&](const Eigen::VectorXd& eps) { return assemble_gradient_log(g, eps); };
  problem.check_step = [](const Eigen::VectorXd& eps) {
    constexpr double kChartLimit = 2.0 * std::numbers::pi - 1e-3;
    for (Eigen::Index i = 0; i + 6 <= eps.size(); i += 6) {
      if (eps.segment<3>(i).norm() > kChartLimit) {
        throw PoseChartError(
            "lm_minimize_pose: rotation coordinate left the log chart; re-anchor the window "
            "(re-express poses relative to a nearby reference) and retry");
      }
    }
  };

  const Eigen::VectorXd eps0 = pose_state_to_log(P0);
  PoseSolution out;
  const Eigen::VectorXd eps = run_lm(problem, eps0, cfg, out.report);
  out.poses = pose_state_from_log(eps);
  return out;
}

}  // namespace rangeloc
