#include "eitgate/state.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace eitgate {

QuantumState QuantumState::pure(Eigen::VectorXcd psi, double time) {
  QuantumState s;
  s.rep_ = Representation::PureVector;
  s.psi_ = std::move(psi);
  s.time_ = time;
  return s;
}

QuantumState QuantumState::density(Eigen::MatrixXcd rho, double time) {
  if (rho.rows() != rho.cols()) throw ModelError("density matrix must be square");
  QuantumState s;
  s.rep_ = Representation::DensityMatrix;
  s.rho_ = std::move(rho);
  s.time_ = time;
  return s;
}

QuantumState QuantumState::basis(const CompositeSystem& system,
                                 const std::vector<std::string>& labels, Representation rep) {
  const auto n = static_cast<Eigen::Index>(system.dimension());
  const auto idx = static_cast<Eigen::Index>(system.index_of(labels));
  if (rep == Representation::PureVector) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
    psi[idx] = 1.0;
    return pure(std::move(psi));
  }
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  rho(idx, idx) = 1.0;
  return density(std::move(rho));
}

std::size_t QuantumState::dimension() const {
  return static_cast<std::size_t>(is_pure() ? psi_.size() : rho_.rows());
}

const Eigen::VectorXcd& QuantumState::vector() const {
  if (!is_pure()) throw ModelError("state is a density matrix");
  return psi_;
}
const Eigen::MatrixXcd& QuantumState::matrix() const {
  if (is_pure()) throw ModelError("state is a pure vector");
  return rho_;
}
Eigen::VectorXcd& QuantumState::vector() {
  if (!is_pure()) throw ModelError("state is a density matrix");
  return psi_;
}
Eigen::MatrixXcd& QuantumState::matrix() {
  if (is_pure()) throw ModelError("state is a pure vector");
  return rho_;
}

QuantumState QuantumState::to_density() const {
  if (!is_pure()) return *this;
  return density(psi_ * psi_.adjoint(), time_);
}

Eigen::VectorXd QuantumState::populations() const {
  if (is_pure()) return psi_.cwiseAbs2();
  return rho_.diagonal().real();
}

double QuantumState::trace() const {
  return is_pure() ? psi_.squaredNorm() : rho_.diagonal().real().sum();
}

double QuantumState::purity() const {
  if (is_pure()) return std::pow(psi_.squaredNorm(), 2);
  return (rho_.cwiseAbs2()).sum();  // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
}

namespace {

void check_dim(const QuantumState& s, Eigen::Index rows, Eigen::Index cols) {
  const auto n = static_cast<Eigen::Index>(s.dimension());
  if (rows != n || cols != n) {
    throw ModelError("operator is " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " but the state has dimension " + std::to_string(n));
  }
}

double real_part(cd v) {
  if (std::abs(v.imag()) > 1e-10 * std::max(1.0, std::abs(v.real()))) {
    throw ModelError("expectation value has an imaginary part; operator is not Hermitian");
  }
  return v.real();
}

}  // namespace

double expectation(const QuantumState& state, const SparseOp& op) {
  check_dim(state, op.rows(), op.cols());
  if (state.is_pure()) {
    const auto& psi = state.vector();
    return real_part(psi.dot(op * psi));
  }
  // Tr(rho O) = sum_ij rho_ji O_ij
  const auto& rho = state.matrix();
  cd acc = 0.0;
  for (Eigen::Index i = 0; i < op.outerSize(); ++i) {
    for (SparseOp::InnerIterator it(op, i); it; ++it) acc += rho(it.col(), it.row()) * it.value();
  }
  return real_part(acc);
}

double expectation(const QuantumState& state, const Eigen::MatrixXcd& op) {
  check_dim(state, op.rows(), op.cols());
  if (state.is_pure()) {
    const auto& psi = state.vector();
    return real_part(psi.dot(op * psi));
  }
  return real_part((state.matrix().transpose().cwiseProduct(op)).sum());
}

double project(const QuantumState& state, std::span<const std::size_t> subspace) {
  const auto pops = state.populations();
  double p = 0.0;
  for (auto i : subspace) {
    if (i >= static_cast<std::size_t>(pops.size())) {
      throw ModelError("subspace index outside the state dimension");
    }
    p += pops[static_cast<Eigen::Index>(i)];
  }
  return p;
}

Eigen::VectorXd local_populations(const CompositeSystem& system, const QuantumState& state,
                                  std::size_t site) {
  if (state.dimension() != system.dimension()) throw ModelError("state/system dimension mismatch");
  const auto pops = state.populations();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(system.site(site).dimension()));
  for (Eigen::Index m = 0; m < pops.size(); ++m) {
    out[static_cast<Eigen::Index>(system.local_index(static_cast<std::size_t>(m), site))] +=
        pops[m];
  }
  return out;
}

StateChecks check_state(const QuantumState& state, std::size_t eigen_limit) {
  StateChecks c;
  if (state.is_pure()) {
    c.trace_error = std::abs(state.vector().squaredNorm() - 1.0);
    return c;
  }
  const auto& rho = state.matrix();
  c.trace_error = std::abs(rho.trace() - 1.0);
  c.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (state.dimension() <= eigen_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
  } else {
    c.min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  }
  return c;
}

}  // namespace eitgate
