#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "eitgate/atom_model.hpp"
#include "eitgate/pulse.hpp"

namespace eitgate {

using cd = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<cd, Eigen::RowMajor>;

/// Register of atoms, each with its own level scheme, placed by a Geometry and
/// coupled through the Rydberg pair interaction. Basis ordering is site-major:
/// site 0 (the control) is the most significant digit.
class CompositeSystem {
 public:
  CompositeSystem(std::vector<LevelScheme> sites, Geometry geometry, InteractionSpec interaction,
                  bool suppress_target_pairs = false);

  std::size_t num_sites() const { return sites_.size(); }
  std::size_t dimension() const { return dimension_; }
  const LevelScheme& site(std::size_t s) const { return sites_.at(s); }
  const Geometry& geometry() const { return geometry_; }
  const InteractionSpec& interaction() const { return interaction_; }
  bool suppress_target_pairs() const { return suppress_target_pairs_; }
  std::size_t stride(std::size_t s) const { return strides_[s]; }

  /// Composite index of a product state given one level label per site.
  std::size_t index_of(const std::vector<std::string>& labels) const;
  /// Local level index of `site` in composite basis state `index`.
  std::size_t local_index(std::size_t index, std::size_t site) const {
    return (index / strides_[site]) % sites_[site].dimension();
  }
  /// "q0,q1,..." label of a composite basis state.
  std::string basis_label(std::size_t index) const;

  struct PairTerm {
    std::size_t i = 0;
    std::size_t j = 0;
    double strength = 0.0;  // rad/s
  };
  /// V(R_ij) |r_i r_j><r_i r_j| for every interacting pair.
  const std::vector<PairTerm>& pair_terms() const { return pairs_; }

  /// Composite indices whose `site` component is local level `level`.
  std::vector<std::size_t> indices_with(std::size_t site, std::size_t level) const;

 private:
  std::vector<LevelScheme> sites_;
  Geometry geometry_;
  InteractionSpec interaction_;
  bool suppress_target_pairs_ = false;
  std::vector<std::size_t> strides_;
  std::size_t dimension_ = 1;
  std::vector<PairTerm> pairs_;
};

/// Collapse operator sqrt(rate) |to><from| acting on one site.
struct JumpOperator {
  std::size_t site = 0;
  std::size_t from = 0;  // local level index
  std::size_t to = 0;
  double rate = 0.0;  // rad/s
  std::string label;
};

std::vector<JumpOperator> build_jump_operators(const CompositeSystem& system);
SparseOp jump_matrix(const CompositeSystem& system, const JumpOperator& jump);

/// Hermitian rotating-frame Hamiltonian at time t. Outside every drive
/// segment only level energies, static shifts and pair interactions remain.
SparseOp build_hamiltonian(const CompositeSystem& system, const PulseSequence& sequence, double t);

/// Hamiltonian of one segment (or of free evolution when `segment` is null),
/// split into a static part and envelope-weighted groups that share a single
/// sparsity pattern. With `include_loss` the anti-Hermitian decay term
/// -i/2 sum Gamma |b><b| is folded into the static part.
class SegmentOperator {
 public:
  SegmentOperator(const CompositeSystem& system, const Segment* segment, bool include_loss);

  double start() const { return start_; }
  /// Writes H(t) into `work`, which must be a copy of pattern().
  void evaluate(double t, SparseOp& work) const;
  const SparseOp& pattern() const { return pattern_; }

 private:
  struct Group {
    Envelope envelope;  // shape with unit peak
    int power = 1;
    Eigen::VectorXcd values;
  };
  double start_ = 0.0;
  SparseOp pattern_;
  Eigen::VectorXcd static_values_;
  std::vector<Group> groups_;
};

/// 2x2 unitary of an instantaneous gate on {q0, q1}.
Eigen::Matrix2cd gate_matrix(GateKind gate, double angle);

void apply_local_unitary(const CompositeSystem& system, std::size_t site,
                         const Eigen::Matrix2cd& u, Eigen::VectorXcd& psi);
void apply_local_unitary(const CompositeSystem& system, std::size_t site,
                         const Eigen::Matrix2cd& u, Eigen::MatrixXcd& rho);

}  // namespace eitgate
