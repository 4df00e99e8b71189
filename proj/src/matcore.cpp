#include "keyrate/matcore.hpp"

#include <cmath>
#include <sstream>

namespace keyrate {

namespace {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    std::ostringstream os;
    os << "SymMatrix: expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw InvalidMatrix(os.str());
  }
  if (!m.allFinite()) throw InvalidMatrix("SymMatrix: non-finite entry");
  m_ = symmetrized(m);
}

SymMatrix SymMatrix::zero(int p) { return SymMatrix(Eigen::MatrixXd::Zero(p, p)); }

SymMatrix SymMatrix::identity(int p) { return SymMatrix(Eigen::MatrixXd::Identity(p, p)); }

SymMatrix SymMatrix::scaled_identity(int p, double s) {
  return SymMatrix(s * Eigen::MatrixXd::Identity(p, p));
}

SymMatrix SymMatrix::diagonal(const std::vector<double>& d) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  return SymMatrix(Eigen::MatrixXd(v.asDiagonal()));
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const auto p = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != p)
      throw InvalidMatrix("SymMatrix::from_rows: ragged rows");
    for (Eigen::Index j = 0; j < p; ++j) m(i, j) = rows[i][j];
  }
  return SymMatrix(m);
}

std::vector<std::vector<double>> SymMatrix::rows() const {
  std::vector<std::vector<double>> out(dim(), std::vector<double>(dim()));
  for (int i = 0; i < dim(); ++i)
    for (int j = 0; j < dim(); ++j) out[i][j] = m_(i, j);
  return out;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  require_same_dim(*this, o, "operator+");
  return SymMatrix(m_ + o.m_, Trusted{});
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  require_same_dim(*this, o, "operator-");
  return SymMatrix(m_ - o.m_, Trusted{});
}

SymMatrix SymMatrix::operator-() const { return SymMatrix(-m_, Trusted{}); }

SymMatrix SymMatrix::operator*(double s) const { return SymMatrix(Eigen::MatrixXd(s * m_)); }

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  require_same_dim(*this, o, "operator+=");
  m_ += o.m_;
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  require_same_dim(*this, o, "operator-=");
  m_ -= o.m_;
  return *this;
}

void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* where) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << where << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
    throw DimensionMismatch(os.str());
  }
}

double psd_tolerance(const SymMatrix& m) { return 1e-9 * (1.0 + m.frobenius()); }

std::optional<double> try_logdet(const SymMatrix& m) noexcept {
  Eigen::LLT<Eigen::MatrixXd> llt(m.mat());
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd d = llt.matrixLLT().diagonal();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) return std::nullopt;
    acc += std::log(d[i]);
  }
  return 2.0 * acc;
}

double logdet(const SymMatrix& m) {
  if (auto v = try_logdet(m)) return *v;
  std::ostringstream os;
  os << "logdet: matrix is not positive definite (min eigenvalue " << min_eig(m) << ")";
  throw NotPositiveDefinite(os.str());
}

Eigen::VectorXd eigenvalues(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double min_eig(const SymMatrix& m) { return eigenvalues(m)[0]; }

double max_eig(const SymMatrix& m) {
  const Eigen::VectorXd ev = eigenvalues(m);
  return ev[ev.size() - 1];
}

bool loewner_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
  require_same_dim(a, b, "loewner_leq");
  return min_eig(b - a) >= -tol;
}

SymMatrix project_psd(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat());
  if (es.eigenvalues()[0] >= 0.0) return m;
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
  return from_eigen(es.eigenvectors(), d);
}

SymMatrix inv(const SymMatrix& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.mat());
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "inv: matrix is not positive definite (min eigenvalue " << min_eig(m) << ")";
    throw NotPositiveDefinite(os.str());
  }
  return SymMatrix(llt.solve(Eigen::MatrixXd::Identity(m.dim(), m.dim())));
}

Eigen::MatrixXd cholesky_lower(const SymMatrix& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m.mat());
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("cholesky_lower: not positive definite");
  return llt.matrixL();
}

SymMatrix from_eigen(const Eigen::MatrixXd& q, const Eigen::VectorXd& d) {
  return SymMatrix(q * d.asDiagonal() * q.transpose());
}

SymMatrix congruence(const Eigen::MatrixXd& l, const SymMatrix& m) {
  return SymMatrix(l * m.mat() * l.transpose());
}

}  // namespace keyrate
