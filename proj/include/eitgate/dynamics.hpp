#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eitgate/integrator.hpp"
#include "eitgate/state.hpp"

namespace eitgate {

enum class IntegratorMethod { AdaptiveRk, FixedRk4, Trajectories };

std::string to_string(IntegratorMethod m);
IntegratorMethod integrator_method_from_string(const std::string& s);

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::AdaptiveRk;
  double tolerance = 1e-8;    // per-step max-abs error target
  double max_step = 5e-9;     // s
  double fixed_step = 2e-12;  // s, FixedRk4 only
  std::size_t trajectories = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::size_t dense_cap = 4096;

  void validate() const;
};

struct EvolutionDiagnostics {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;  // NaN when not computed
  double wall_seconds = 0.0;
};

struct DenseOptions {
  std::vector<double> sample_times;  // states recorded at these times
  double end_time = -1.0;            // < 0: end of the sequence
};

struct DenseResult {
  QuantumState final_state;
  std::vector<QuantumState> samples;
  EvolutionDiagnostics diagnostics;
};

/// Integrates the Lindblad master equation through the whole sequence,
/// starting from `state` at t = 0. Instantaneous gate segments are applied as
/// exact unitaries. Throws ModelError if the state is not a density matrix or
/// exceeds the dense cap, IntegratorError on step-size collapse.
DenseResult evolve_dense(const QuantumState& state, const CompositeSystem& system,
                         const PulseSequence& sequence, const IntegratorConfig& config,
                         const DenseOptions& options = {});

/// Maps a normalized trajectory state to a list of observable values.
using Observable = std::function<std::vector<double>(const Eigen::VectorXcd&)>;

struct TrajectoryOptions {
  Observable observable;           // default: all basis populations
  bool accumulate_density = false; // also average |psi><psi| (dimension <= dense cap)
  double end_time = -1.0;
};

struct TrajectoryResult {
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::size_t trajectories = 0;
  std::size_t jumped = 0;     // trajectories with at least one jump
  std::size_t resampled = 0;  // trajectories redrawn after a norm collapse
  std::optional<QuantumState> averaged;
  EvolutionDiagnostics diagnostics;
};

/// Monte-Carlo wavefunction unraveling of the same master equation (waiting
/// time method). Trajectories share the no-jump evolution until their first
/// jump. Each trajectory draws from its own stream keyed on (seed, id), so
/// results do not depend on the thread count.
TrajectoryResult evolve_trajectories(const QuantumState& state, const CompositeSystem& system,
                                     const PulseSequence& sequence,
                                     const IntegratorConfig& config,
                                     const TrajectoryOptions& options = {});

/// Lindblad right-hand side L(rho) at time t (exposed for property tests).
Eigen::MatrixXcd lindblad_rhs(const CompositeSystem& system, const PulseSequence& sequence,
                              double t, const Eigen::MatrixXcd& rho);

}  // namespace eitgate
