#pragma once

#include <span>
#include <string>
#include <vector>

#include "eitgate/system.hpp"

namespace eitgate {

/// Density matrix or pure state vector over a composite basis.
class QuantumState {
 public:
  enum class Representation { DensityMatrix, PureVector };

  static QuantumState pure(Eigen::VectorXcd psi, double time = 0.0);
  static QuantumState density(Eigen::MatrixXcd rho, double time = 0.0);
  /// Product basis state, one label per site.
  static QuantumState basis(const CompositeSystem& system, const std::vector<std::string>& labels,
                            Representation rep = Representation::DensityMatrix);

  Representation representation() const { return rep_; }
  bool is_pure() const { return rep_ == Representation::PureVector; }
  std::size_t dimension() const;
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  const Eigen::VectorXcd& vector() const;
  const Eigen::MatrixXcd& matrix() const;
  Eigen::VectorXcd& vector();
  Eigen::MatrixXcd& matrix();

  /// |psi><psi| for pure states, a copy otherwise.
  QuantumState to_density() const;
  /// Diagonal of the density matrix.
  Eigen::VectorXd populations() const;
  double trace() const;
  double purity() const;

 private:
  Representation rep_ = Representation::DensityMatrix;
  Eigen::VectorXcd psi_;
  Eigen::MatrixXcd rho_;
  double time_ = 0.0;
};

/// Tr(rho O); throws ModelError on dimension mismatch or when the result has
/// an imaginary part above 1e-10 (non-Hermitian O).
double expectation(const QuantumState& state, const SparseOp& op);
double expectation(const QuantumState& state, const Eigen::MatrixXcd& op);

/// Probability weight of the subspace spanned by the listed basis states.
double project(const QuantumState& state, std::span<const std::size_t> subspace);

/// Reduced populations of one site, indexed by its local levels.
Eigen::VectorXd local_populations(const CompositeSystem& system, const QuantumState& state,
                                  std::size_t site);

/// Invariant measurements used by the engine diagnostics.
struct StateChecks {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;  // NaN when skipped for size
};
StateChecks check_state(const QuantumState& state, std::size_t eigen_limit = 1024);

}  // namespace eitgate
