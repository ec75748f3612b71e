#include "rangeloc/block_tridiagonal.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace rangeloc {

BlockTridiagonal::BlockTridiagonal(std::size_t num_blocks, int block_size)
    : block_(block_size),
      diag_(num_blocks, Eigen::MatrixXd::Zero(block_size, block_size)),
      lower_(num_blocks > 0 ? num_blocks - 1 : 0, Eigen::MatrixXd::Zero(block_size, block_size)) {}

void BlockTridiagonal::add_to_diagonal(double lambda) {
  for (auto& d : diag_) d.diagonal().array() += lambda;
}

std::size_t BlockTridiagonal::structural_nonzeros() const {
  const std::size_t b2 = static_cast<std::size_t>(block_) * static_cast<std::size_t>(block_);
  return b2 * diag_.size() + 2 * b2 * lower_.size();
}

Eigen::VectorXd BlockTridiagonal::multiply(const Eigen::VectorXd& v) const {
  const int b = block_;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (std::size_t i = 0; i < diag_.size(); ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i) * b;
    out.segment(r, b).noalias() += diag_[i] * v.segment(r, b);
    if (i > 0) {
      const Eigen::Index c = r - b;
      out.segment(r, b).noalias() += lower_[i - 1] * v.segment(c, b);
      out.segment(c, b).noalias() += lower_[i - 1].transpose() * v.segment(r, b);
    }
  }
  return out;
}

Eigen::MatrixXd BlockTridiagonal::to_dense() const {
  const int b = block_;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dimension(), dimension());
  for (std::size_t i = 0; i < diag_.size(); ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i) * b;
    m.block(r, r, b, b) = diag_[i];
    if (i > 0) {
      m.block(r, r - b, b, b) = lower_[i - 1];
      m.block(r - b, r, b, b) = lower_[i - 1].transpose();
    }
  }
  return m;
}

std::optional<Eigen::VectorXd> BlockTridiagonal::solve(const Eigen::VectorXd& rhs) const {
  const std::size_t n = diag_.size();
  const int b = block_;
  if (n == 0) return Eigen::VectorXd(0);

  // A = L L^T with L block lower-bidiagonal: diagonal factors C_i (lower
  // triangular) and sub-diagonal blocks S_i = A_{i,i-1} C_{i-1}^{-T}.
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol(n);
  std::vector<Eigen::MatrixXd> sub(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::MatrixXd schur = diag_[i];
    if (i > 0) {
      // S = A_{i,i-1} C^{-T}  <=>  C S^T = A_{i,i-1}^T
      const Eigen::MatrixXd St =
          chol[i - 1].matrixL().solve(lower_[i - 1].transpose());
      sub[i - 1] = St.transpose();
      schur.noalias() -= sub[i - 1] * St;
    }
    chol[i].compute(schur);
    if (chol[i].info() != Eigen::Success) return std::nullopt;
  }

  // Forward: L y = rhs.
  Eigen::VectorXd y(rhs.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i) * b;
    Eigen::VectorXd v = rhs.segment(r, b);
    if (i > 0) v.noalias() -= sub[i - 1] * y.segment(r - b, b);
    y.segment(r, b) = chol[i].matrixL().solve(v);
  }
  // Backward: L^T x = y.
  Eigen::VectorXd x(rhs.size());
  for (std::size_t k = n; k-- > 0;) {
    const Eigen::Index r = static_cast<Eigen::Index>(k) * b;
    Eigen::VectorXd v = y.segment(r, b);
    if (k + 1 < n) v.noalias() -= sub[k].transpose() * x.segment(r + b, b);
    x.segment(r, b) = chol[k].matrixU().solve(v);
  }
  if (!x.allFinite()) return std::nullopt;
  return x;
}

}  // namespace rangeloc
