#pragma once

// Dense symmetric-matrix kernel shared by every other module.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace keyrate {

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidMatrix : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Real symmetric p x p matrix. Every constructor symmetrizes its input as
/// (M + M^T) / 2 and rejects empty, non-square or non-finite data.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::MatrixXd& m);

  static SymMatrix zero(int p);
  static SymMatrix identity(int p);
  static SymMatrix scaled_identity(int p, double s);
  static SymMatrix diagonal(const std::vector<double>& d);
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows);

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Eigen::MatrixXd& mat() const { return m_; }

  double frobenius() const { return m_.norm(); }
  double trace() const { return m_.trace(); }
  std::vector<std::vector<double>> rows() const;

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator-() const;
  SymMatrix operator*(double s) const;
  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);

 private:
  struct Trusted {};
  SymMatrix(Eigen::MatrixXd m, Trusted) : m_(std::move(m)) {}

  Eigen::MatrixXd m_;
};

inline SymMatrix operator*(double s, const SymMatrix& m) { return m * s; }

/// Relative PSD tolerance 1e-9 * (1 + ||M||_F).
double psd_tolerance(const SymMatrix& m);

/// Natural-log determinant via Cholesky. Throws NotPositiveDefinite.
double logdet(const SymMatrix& m);

/// Non-throwing logdet; empty when the Cholesky factorization fails.
std::optional<double> try_logdet(const SymMatrix& m) noexcept;

/// Ascending eigenvalues.
Eigen::VectorXd eigenvalues(const SymMatrix& m);
double min_eig(const SymMatrix& m);
double max_eig(const SymMatrix& m);

/// A <= B in the Loewner order: min_eig(B - A) >= -tol.
bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol);

/// Clips negative eigenvalues to zero.
SymMatrix project_psd(const SymMatrix& m);

/// Symmetric inverse of a positive definite matrix. Throws NotPositiveDefinite.
SymMatrix inv(const SymMatrix& m);

/// Lower Cholesky factor of a positive definite matrix.
Eigen::MatrixXd cholesky_lower(const SymMatrix& m);

/// Q * diag(d) * Q^T, symmetrized.
SymMatrix from_eigen(const Eigen::MatrixXd& q, const Eigen::VectorXd& d);

/// L * M * L^T for a general (not necessarily symmetric) L.
SymMatrix congruence(const Eigen::MatrixXd& l, const SymMatrix& m);

void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* where);

}  // namespace keyrate
