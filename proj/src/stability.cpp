#include "rangeloc/stability.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rangeloc/errors.hpp"

namespace rangeloc {

bool FeasibleSetSpec::contains(const Eigen::VectorXd& x, const Eigen::VectorXd& x_bar) const {
  const std::size_t n = anchors.size();
  if (static_cast<std::size_t>(x.size()) != 3 * n || x_bar.size() != x.size()) {
    throw GraphError("feasible set: state dimension mismatch");
  }
  constexpr double kSlack = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 t = extract_state(x, i);
    if ((t - anchors[i]).norm() > ranges[i] + eta + kSlack) return false;
    if ((t - extract_state(x_bar, i)).norm() > trust_radius + kSlack) return false;
    if (i > 0 && (t - extract_state(x, i - 1)).norm() > v_max * T + kSlack) return false;
  }
  return true;
}

FeasibleSetSpec FeasibleSetSpec::from_graph(const FactorGraph& g, double eta, double v_max,
                                            double trust_radius) {
  if (g.mode() != GraphMode::Translation) {
    throw GraphError("stability diagnostics need a translation graph");
  }
  FeasibleSetSpec spec;
  spec.eta = eta;
  spec.v_max = v_max;
  spec.trust_radius = trust_radius;
  const std::size_t n = g.num_free();
  spec.anchors.assign(n, Vec3::Zero());
  spec.ranges.assign(n, 0.0);
  std::vector<bool> seen(n, false);
  for (const Edge& edge : g.edges()) {
    if (const auto* r = std::get_if<RangeEdge>(&edge)) {
      const auto slot = g.slot_of(r->node);
      if (slot && !seen[*slot]) {
        spec.anchors[*slot] = r->factor.anchor;
        spec.ranges[*slot] = r->factor.d;
        seen[*slot] = true;
      }
    } else if (const auto* s = std::get_if<SmoothnessEdge>(&edge)) {
      spec.T = std::max(spec.T, s->factor.dt);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw GraphError("feasible set: free node without a range factor");
  }
  return spec;
}

namespace {

double symmetric_norm(const Eigen::MatrixXd& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

DeltaBounds estimate_delta_bounds(const FactorGraph& g, const Eigen::VectorXd& x_bar,
                                  const FeasibleSetSpec& spec, std::size_t samples,
                                  std::uint64_t seed, const std::vector<Eigen::VectorXd>& probes) {
  if (samples < 1) throw ConfigError("stability.samples must be >= 1");
  const std::size_t n = spec.anchors.size();
  if (static_cast<std::size_t>(x_bar.size()) != 3 * n) {
    throw GraphError("estimate_delta_bounds: x_bar dimension mismatch");
  }

  DeltaBounds out;
  out.delta_s = std::numeric_limits<double>::infinity();
  out.delta_l = 0.0;
  auto visit = [&](const Eigen::VectorXd& z) {
    const double s = symmetric_norm(assemble_hessian(g, z, HessianMode::Exact).to_dense());
    out.delta_s = std::min(out.delta_s, s);
    out.delta_l = std::max(out.delta_l, s);
  };

  visit(x_bar);
  for (const auto& p : probes) {
    if (p.size() != x_bar.size()) throw GraphError("estimate_delta_bounds: probe dimension mismatch");
    visit(p);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t max_proposals = samples * 1000;
  Eigen::VectorXd t(x_bar.size());
  while (out.samples_used < samples && out.proposals < max_proposals) {
    ++out.proposals;
    // Chain proposal: the first node near x_bar, every next node within
    // v_max * T of its predecessor.
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
      const double norm = dir.norm();
      if (norm > 0.0) dir /= norm;
      const double reach = i == 0 ? spec.trust_radius : spec.v_max * spec.T;
      const Vec3 base = i == 0 ? Vec3(extract_state(x_bar, 0)) : Vec3(extract_state(t, i - 1));
      set_state(t, i, base + reach * std::cbrt(unit(rng)) * dir);
    }
    if (!spec.contains(t, x_bar)) continue;
    const double theta = unit(rng);
    visit(t);
    visit(theta * t + (1.0 - theta) * x_bar);
    ++out.samples_used;
  }
  if (out.samples_used < samples) {
    throw SamplingFailure("feasible-set sampler accepted " + std::to_string(out.samples_used) +
                          " of " + std::to_string(out.proposals) +
                          " proposals (below 0.1%); widen the trust radius or check the measurements");
  }
  return out;
}

double spectral_norm(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                     Eigen::Index dim, int max_iterations, double rel_tol) {
  if (dim == 0) return 0.0;
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  v.normalize();
  double sigma_sq = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd Av = apply(v);
    const Eigen::VectorXd w = apply(Av);  // symmetric operator: A^T A v = A A v
    const double next = Av.squaredNorm();
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(next - sigma_sq) <= rel_tol * next) {
      sigma_sq = next;
      break;
    }
    sigma_sq = next;
  }
  return std::sqrt(apply(v).squaredNorm());
}

double spectral_norm(const Eigen::MatrixXd& A, int max_iterations, double rel_tol) {
  const Eigen::MatrixXd AtA = A.transpose() * A;
  if (A.cols() == 0) return 0.0;
  Eigen::VectorXd v(A.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  v.normalize();
  double sigma_sq = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd w = AtA * v;
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
    if (it > 0 && std::abs(next - sigma_sq) <= rel_tol * next) {
      sigma_sq = next;
      break;
    }
    sigma_sq = next;
  }
  return (A * v).norm();
}

double alpha_from(double delta_s, double delta_l, double mu) {
  if (!(mu > 0.0)) throw ConfigError("compute_alpha: mu must be > 0");
  return std::max(std::abs(1.0 - delta_s / mu), std::abs(1.0 - delta_l / mu));
}

AlphaResult compute_alpha(double delta_s, double delta_l, const HessianApprox& B, double lambda) {
  AlphaResult r;
  r.mu = spectral_norm([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(B.multiply(v) + lambda * v); },
                       static_cast<Eigen::Index>(B.dimension()));
  r.alpha = alpha_from(delta_s, delta_l, r.mu);
  return r;
}

std::optional<double> asymptotic_bound(double alpha, double beta, double c) {
  if (!(alpha < 1.0)) return std::nullopt;
  return beta / (1.0 - alpha) + alpha * c / (1.0 - alpha);
}

StabilityReport diagnose_window(const FactorGraph& g, const Eigen::VectorXd& x_bar, double lambda,
                                const DiagnoseOptions& opt, const std::optional<Eigen::VectorXd>& truth) {
  const FeasibleSetSpec spec = FeasibleSetSpec::from_graph(g, opt.eta, opt.v_max, opt.trust_radius);
  std::vector<Eigen::VectorXd> probes;
  if (truth) {
    for (double theta : {0.25, 0.5, 0.75, 1.0}) probes.push_back(theta * *truth + (1.0 - theta) * x_bar);
  }
  const DeltaBounds db = estimate_delta_bounds(g, x_bar, spec, opt.samples, opt.seed, probes);
  const HessianApprox B = assemble_hessian(g, x_bar, opt.hessian);
  const AlphaResult ar = compute_alpha(db.delta_s, db.delta_l, B, lambda);

  StabilityReport r;
  r.delta_s = db.delta_s;
  r.delta_l = db.delta_l;
  r.mu = ar.mu;
  r.alpha = ar.alpha;
  r.lambda = lambda;
  r.samples_used = db.samples_used;
  r.inner_approximation = db.inner_approximation;
  const double N = static_cast<double>(g.num_free());
  r.beta_proof = (3.0 * N - 1.0) * opt.xi / ar.mu;
  if (truth) {
    r.beta = assemble_gradient(g, *truth).norm() / ar.mu;
    r.beta_from_truth = true;
  } else {
    r.beta = r.beta_proof;
  }
  r.c = N * opt.v_max * spec.T;
  r.bound = asymptotic_bound(r.alpha, r.beta, r.c);
  return r;
}

double finite_bound(double alpha, double beta, double c, double e0, std::size_t n) {
  double geo = 0.0;  // sum_{i<n} alpha^i
  double a = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    geo += a;
    a *= alpha;
  }
  return a * e0 + beta * geo + c * alpha * geo;
}

ErrorBound error_bound(const std::vector<StabilityReport>& reports, std::optional<double> initial_error,
                       BetaSource source) {
  ErrorBound out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!(r.alpha < 1.0) && !out.offending_step) out.offending_step = r.step;
    out.alpha = std::max(out.alpha, r.alpha);
    out.beta = std::max(out.beta, source == BetaSource::Proof ? r.beta_proof : r.beta);
    out.c = std::max(out.c, r.c);
  }
  if (reports.empty() || out.offending_step) return out;
  out.defined = true;
  out.asymptotic = asymptotic_bound(out.alpha, out.beta, out.c);
  if (initial_error) out.finite = finite_bound(out.alpha, out.beta, out.c, *initial_error, reports.size());
  return out;
}

}  // namespace rangeloc
