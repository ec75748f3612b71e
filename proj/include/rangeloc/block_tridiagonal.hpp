#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace rangeloc {

/// Symmetric block-tridiagonal matrix with square blocks of a fixed size.
/// Only the diagonal blocks and the sub-diagonal blocks (i, i-1) are stored.
class BlockTridiagonal {
 public:
  BlockTridiagonal() = default;
  BlockTridiagonal(std::size_t num_blocks, int block_size);

  std::size_t num_blocks() const { return diag_.size(); }
  int block_size() const { return block_; }
  std::size_t dimension() const { return num_blocks() * static_cast<std::size_t>(block_); }

  Eigen::MatrixXd& diag(std::size_t i) { return diag_[i]; }
  const Eigen::MatrixXd& diag(std::size_t i) const { return diag_[i]; }
  /// Block (i, i-1), i >= 1.
  Eigen::MatrixXd& lower(std::size_t i) { return lower_[i - 1]; }
  const Eigen::MatrixXd& lower(std::size_t i) const { return lower_[i - 1]; }

  void add_to_diagonal(double lambda);

  /// b^2 n diagonal entries plus 2 b^2 (n - 1) off-diagonal entries.
  std::size_t structural_nonzeros() const;

  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd to_dense() const;

  /// Block Cholesky factorization and solve of A x = rhs. Returns nullopt
  /// when A is not positive definite.
  std::optional<Eigen::VectorXd> solve(const Eigen::VectorXd& rhs) const;

 private:
  int block_ = 3;
  std::vector<Eigen::MatrixXd> diag_;
  std::vector<Eigen::MatrixXd> lower_;
};

}  // namespace rangeloc
