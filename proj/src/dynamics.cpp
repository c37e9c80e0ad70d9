#include "eitgate/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <thread>

namespace eitgate {

std::string to_string(IntegratorMethod m) {
  switch (m) {
    case IntegratorMethod::AdaptiveRk: return "adaptive_rk";
    case IntegratorMethod::FixedRk4: return "fixed_rk4";
    case IntegratorMethod::Trajectories: return "trajectories";
  }
  return "?";
}

IntegratorMethod integrator_method_from_string(const std::string& s) {
  if (s == "adaptive_rk") return IntegratorMethod::AdaptiveRk;
  if (s == "fixed_rk4") return IntegratorMethod::FixedRk4;
  if (s == "trajectories") return IntegratorMethod::Trajectories;
  throw ModelError("unknown integrator method '" + s + "'");
}

void IntegratorConfig::validate() const {
  if (!(tolerance > 0.0)) throw ModelError("integrator tolerance must be > 0");
  if (!(max_step > 0.0)) throw ModelError("integrator max step must be > 0");
  if (!(fixed_step > 0.0)) throw ModelError("integrator fixed step must be > 0");
  if (trajectories < 1) throw ModelError("trajectory count must be >= 1");
  if (dense_cap < 1) throw ModelError("dense cap must be >= 1");
}

namespace {

using Clock = std::chrono::steady_clock;

struct Piece {
  const Segment* gate = nullptr;  // set for instantaneous gates
  double start = 0.0;
  double end = 0.0;
  std::shared_ptr<const SegmentOperator> op;
};

std::vector<Piece> build_timeline(const CompositeSystem& sys, const PulseSequence& seq,
                                  double end_time) {
  seq.validate(sys.num_sites());
  std::vector<Piece> out;
  auto idle = std::make_shared<const SegmentOperator>(sys, nullptr, true);
  double cur = 0.0;
  for (const auto& s : seq.segments()) {
    if (s.start > cur) out.push_back({nullptr, cur, s.start, idle});
    if (s.kind == SegmentKind::Gate) {
      for (auto site : s.sites) {
        const auto& scheme = sys.site(site);
        if (!scheme.has_level("q0") || !scheme.has_level("q1")) {
          throw ModelError("gate on site " + std::to_string(site) + " without q0/q1 levels");
        }
      }
      out.push_back({&s, s.start, s.start, nullptr});
    } else {
      out.push_back({nullptr, s.start, s.end(),
                     std::make_shared<const SegmentOperator>(sys, &s, true)});
    }
    cur = std::max(cur, s.end());
  }
  if (end_time > cur) out.push_back({nullptr, cur, end_time, idle});
  return out;
}

struct JumpData {
  double rate = 0.0;
  std::vector<Eigen::Index> from;
  Eigen::Index offset = 0;
};

std::vector<JumpData> jump_data(const CompositeSystem& sys) {
  std::vector<JumpData> out;
  for (const auto& j : build_jump_operators(sys)) {
    JumpData d;
    d.rate = j.rate;
    for (auto m : sys.indices_with(j.site, j.from)) d.from.push_back(static_cast<Eigen::Index>(m));
    d.offset = (static_cast<Eigen::Index>(j.to) - static_cast<Eigen::Index>(j.from)) *
               static_cast<Eigen::Index>(sys.stride(j.site));
    out.push_back(std::move(d));
  }
  return out;
}

template <class State>
void apply_gate(const CompositeSystem& sys, const Segment& seg, State& state) {
  const auto u = gate_matrix(seg.gate, seg.angle);
  for (auto site : seg.sites) apply_local_unitary(sys, site, u, state);
}

// dRho = -i Heff rho + i rho Heff^dag + sum_k L_k rho L_k^dag, with A = Heff rho.
void lindblad_apply(const SparseOp& heff, const std::vector<JumpData>& jumps,
                    const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& a, Eigen::MatrixXcd& out) {
  const Eigen::Index n = rho.rows();
  a.noalias() = heff * rho;
  out.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const cd aij = a(i, j), aji = a(j, i);
      out(i, j) = cd(aij.imag() + aji.imag(), aji.real() - aij.real());
    }
  }
  for (const auto& jd : jumps) {
    for (auto c : jd.from) {
      for (auto r : jd.from) out(r + jd.offset, c + jd.offset) += jd.rate * rho(r, c);
    }
  }
}

void track(const QuantumState& s, EvolutionDiagnostics& diag) {
  const auto c = check_state(s, 0);
  diag.max_trace_error = std::max(diag.max_trace_error, c.trace_error);
  diag.max_hermiticity_error = std::max(diag.max_hermiticity_error, c.hermiticity_error);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

Eigen::MatrixXcd lindblad_rhs(const CompositeSystem& system, const PulseSequence& sequence,
                              double t, const Eigen::MatrixXcd& rho) {
  const Segment* active = nullptr;
  for (const auto& s : sequence.segments()) {
    if (s.kind == SegmentKind::Drive && t >= s.start && t <= s.end()) {
      active = &s;
      break;
    }
  }
  SegmentOperator op(system, active, true);
  SparseOp work = op.pattern();
  op.evaluate(t, work);
  Eigen::MatrixXcd a, out;
  lindblad_apply(work, jump_data(system), rho, a, out);
  return out;
}

DenseResult evolve_dense(const QuantumState& state, const CompositeSystem& system,
                         const PulseSequence& sequence, const IntegratorConfig& config,
                         const DenseOptions& options) {
  config.validate();
  const auto t0 = Clock::now();
  if (state.is_pure()) throw ModelError("evolve_dense needs a density-matrix state");
  if (state.dimension() != system.dimension()) throw ModelError("state/system dimension mismatch");
  if (system.dimension() > config.dense_cap) {
    throw ModelError("dimension " + std::to_string(system.dimension()) + " exceeds the dense cap " +
                     std::to_string(config.dense_cap) + "; use trajectories");
  }
  const double end = options.end_time >= 0.0 ? options.end_time : sequence.total_duration();
  const auto pieces = build_timeline(system, sequence, end);
  const auto jumps = jump_data(system);

  std::vector<double> samples = options.sample_times;
  std::sort(samples.begin(), samples.end());
  std::size_t next_sample = 0;

  DenseResult result{state, {}, {}};
  Eigen::MatrixXcd rho = state.matrix();
  auto emit_until = [&](double t) {
    while (next_sample < samples.size() && samples[next_sample] <= t + 1e-18) {
      result.samples.push_back(QuantumState::density(rho, samples[next_sample]));
      track(result.samples.back(), result.diagnostics);
      ++next_sample;
    }
  };

  SparseOp work;
  const SegmentOperator* current = nullptr;
  Eigen::MatrixXcd scratch;
  auto rhs = [&](double t, const Eigen::MatrixXcd& r, Eigen::MatrixXcd& out) {
    current->evaluate(t, work);
    lindblad_apply(work, jumps, r, scratch, out);
  };
  Dopri5<Eigen::MatrixXcd> stepper(rhs, config.tolerance, config.max_step);

  emit_until(0.0);
  for (const auto& p : pieces) {
    if (p.gate) {
      apply_gate(system, *p.gate, rho);
      continue;
    }
    current = p.op.get();
    work = current->pattern();
    // Integrate between breakpoints: sample times inside the piece and its end.
    double t = p.start;
    while (t < p.end) {
      const double stop = (next_sample < samples.size() && samples[next_sample] < p.end)
                              ? std::max(samples[next_sample], t)
                              : p.end;
      if (stop > t) {
        if (config.method == IntegratorMethod::FixedRk4) {
          const auto n = static_cast<std::size_t>(std::ceil((stop - t) / config.fixed_step));
          rk4(rhs, t, stop, rho, n);
          result.diagnostics.accepted_steps += n;
        } else {
          stepper.reset(t, rho);
          while (stepper.t() < stop) stepper.step(stop);
          rho = stepper.y();
        }
      }
      t = stop;
      emit_until(t);
    }
  }
  emit_until(std::numeric_limits<double>::infinity());
  if (config.method != IntegratorMethod::FixedRk4) {
    result.diagnostics.accepted_steps = stepper.accepted();
    result.diagnostics.rejected_steps = stepper.rejected();
  }
  result.final_state = QuantumState::density(std::move(rho), end);
  track(result.final_state, result.diagnostics);
  const auto checks = check_state(result.final_state);
  result.diagnostics.min_eigenvalue = checks.min_eigenvalue;
  result.diagnostics.wall_seconds = seconds_since(t0);
  return result;
}

// ---------------------------------------------------------------------------
// Trajectories

namespace {

struct Threshold {
  double r = 0.0;
  std::size_t id = 0;
};

struct Crossing {
  std::size_t piece = 0;
  double t = 0.0;
};

class TrajectoryEngine {
 public:
  TrajectoryEngine(const CompositeSystem& sys, std::vector<Piece> pieces,
                   const IntegratorConfig& cfg)
      : sys_(sys), pieces_(std::move(pieces)), jumps_(jump_data(sys)), cfg_(cfg) {}

  std::size_t accepted() const { return accepted_.load(); }
  std::size_t rejected() const { return rejected_.load(); }

  // No-jump evolution of psi from (piece, t). For every threshold passed by
  // |psi|^2 (thresholds sorted descending) `on_cross(id, crossing, psi_at)`
  // is called; when it returns true the run stops there with psi and `at`
  // set to the crossing point. Returns whether it stopped early.
  template <class OnCross>
  bool run(Eigen::VectorXcd& psi, Crossing& at, std::span<const Threshold> thresholds,
           OnCross&& on_cross) {
    std::size_t next = 0;
    SparseOp work;
    const SegmentOperator* op = nullptr;
    auto rhs = [&](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& out) {
      op->evaluate(t, work);
      out.noalias() = work * y;
      out *= cd(0.0, -1.0);
    };
    Dopri5<Eigen::VectorXcd> stepper(rhs, cfg_.tolerance, cfg_.max_step);
    bool stopped = false;
    for (std::size_t pi = at.piece; pi < pieces_.size() && !stopped; ++pi) {
      const auto& p = pieces_[pi];
      const double t_begin = pi == at.piece ? std::max(at.t, p.start) : p.start;
      if (p.gate) {
        apply_gate(sys_, *p.gate, psi);
        continue;
      }
      if (t_begin >= p.end) continue;
      op = p.op.get();
      work = op->pattern();
      stepper.reset(t_begin, psi);
      while (stepper.t() < p.end && !stopped) {
        stepper.step(p.end);
        while (next < thresholds.size() && stepper.y().squaredNorm() < thresholds[next].r) {
          const double target = thresholds[next].r;
          double lo = stepper.t_prev(), hi = stepper.t();
          for (int it = 0; it < 60 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            (stepper.interpolate(mid).squaredNorm() < target ? hi : lo) = mid;
          }
          Eigen::VectorXcd at_psi = stepper.interpolate(hi);
          const Crossing c{pi, hi};
          if (on_cross(thresholds[next].id, c, at_psi)) {
            psi = std::move(at_psi);
            at = c;
            stopped = true;
            break;
          }
          ++next;
        }
      }
      if (!stopped) psi = stepper.y();
    }
    accepted_ += stepper.accepted();
    rejected_ += stepper.rejected();
    return stopped;
  }

  // Samples a jump channel with probability ~ rate |L psi|^2 and applies it.
  // Returns false if every channel has vanishing weight.
  bool jump(Eigen::VectorXcd& psi, std::mt19937_64& rng) const {
    std::vector<double> w(jumps_.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < jumps_.size(); ++k) {
      double p = 0.0;
      for (auto m : jumps_[k].from) p += std::norm(psi[m]);
      w[k] = jumps_[k].rate * p;
      total += w[k];
    }
    if (!(total > 1e-300)) return false;
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t k = 0;
    while (k + 1 < w.size() && u >= w[k]) u -= w[k++];
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
    for (auto m : jumps_[k].from) out[m + jumps_[k].offset] = psi[m];
    const double n = out.norm();
    if (!(n > 0.0)) return false;
    psi = out / n;
    return true;
  }

 private:
  const CompositeSystem& sys_;
  std::vector<Piece> pieces_;
  std::vector<JumpData> jumps_;
  IntegratorConfig cfg_;
  std::atomic<std::size_t> accepted_{0}, rejected_{0};
};

std::mt19937_64 stream(std::uint64_t seed, std::size_t id, std::size_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32),
                    static_cast<std::uint32_t>(attempt)};
  return std::mt19937_64(seq);
}

double draw_threshold(std::mt19937_64& rng) {
  return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);  // (0, 1]
}

}  // namespace

TrajectoryResult evolve_trajectories(const QuantumState& state, const CompositeSystem& system,
                                     const PulseSequence& sequence,
                                     const IntegratorConfig& config,
                                     const TrajectoryOptions& options) {
  config.validate();
  const auto t0 = Clock::now();
  if (!state.is_pure()) throw ModelError("trajectories need a pure initial state");
  if (state.dimension() != system.dimension()) throw ModelError("state/system dimension mismatch");
  const double end = options.end_time >= 0.0 ? options.end_time : sequence.total_duration();
  TrajectoryEngine engine(system, build_timeline(system, sequence, end), config);

  Observable observe = options.observable;
  if (!observe) {
    observe = [](const Eigen::VectorXcd& psi) {
      const Eigen::VectorXd p = psi.cwiseAbs2();
      return std::vector<double>(p.data(), p.data() + p.size());
    };
  }
  const bool want_rho = options.accumulate_density && system.dimension() <= config.dense_cap;

  const std::size_t n = config.trajectories;
  Eigen::VectorXcd psi0 = state.vector() / state.vector().norm();

  // Shared no-jump prefix.
  std::vector<Threshold> thresholds(n);
  for (std::size_t id = 0; id < n; ++id) {
    auto rng = stream(config.seed, id, 0);
    thresholds[id] = {draw_threshold(rng), id};
  }
  std::sort(thresholds.begin(), thresholds.end(),
            [](const Threshold& a, const Threshold& b) { return a.r > b.r || (a.r == b.r && a.id < b.id); });

  struct Fork {
    std::size_t id = 0;
    Crossing at;
    Eigen::VectorXcd psi;
    std::size_t attempt = 0;
  };
  std::vector<Fork> forks;
  Eigen::VectorXcd prefix = psi0;
  Crossing start{0, 0.0};
  engine.run(prefix, start, thresholds, [&](std::size_t id, const Crossing& c, const Eigen::VectorXcd& p) {
    forks.push_back({id, c, p, 0});
    return false;
  });
  std::sort(forks.begin(), forks.end(), [](const Fork& a, const Fork& b) { return a.id < b.id; });

  // Finish every forked trajectory independently.
  std::atomic<std::size_t> next{0}, resampled{0};
  auto finish = [&](Fork& f) {
    auto rng = stream(config.seed, f.id, f.attempt);
    draw_threshold(rng);  // the first threshold was consumed by the prefix
    while (true) {
      if (!engine.jump(f.psi, rng)) {
        // Norm collapse: redraw the whole trajectory from a fresh stream.
        ++resampled;
        if (++f.attempt > 16) throw IntegratorError("repeated trajectory collapse", f.at.t);
        rng = stream(config.seed, f.id, f.attempt);
        const Threshold th{draw_threshold(rng), f.id};
        f.psi = psi0;
        f.at = {0, 0.0};
        if (!engine.run(f.psi, f.at, std::span(&th, 1), [](auto, auto&, auto&) { return true; })) {
          break;
        }
        continue;
      }
      const Threshold th{draw_threshold(rng), f.id};
      if (!engine.run(f.psi, f.at, std::span(&th, 1), [](auto, auto&, auto&) { return true; })) {
        break;
      }
    }
    f.psi /= f.psi.norm();
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < forks.size(); i = next++) finish(forks[i]);
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads,
                                                          static_cast<unsigned>(forks.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Deterministic reduction: the no-jump members first, then forks by id.
  TrajectoryResult result;
  result.trajectories = n;
  result.jumped = forks.size();
  result.resampled = resampled.load();
  std::vector<double> sum, sumsq;
  Eigen::MatrixXcd rho;
  auto accumulate = [&](const Eigen::VectorXcd& psi, double weight) {
    const auto v = observe(psi);
    if (sum.empty()) {
      sum.assign(v.size(), 0.0);
      sumsq.assign(v.size(), 0.0);
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      sum[i] += weight * v[i];
      sumsq[i] += weight * v[i] * v[i];
    }
    if (want_rho) {
      if (rho.size() == 0) rho = Eigen::MatrixXcd::Zero(psi.size(), psi.size());
      rho.noalias() += weight * psi * psi.adjoint();
    }
  };
  const std::size_t quiet = n - forks.size();
  if (quiet > 0) accumulate(prefix / prefix.norm(), static_cast<double>(quiet));
  for (const auto& f : forks) accumulate(f.psi, 1.0);

  const double dn = static_cast<double>(n);
  result.mean.resize(sum.size());
  result.standard_error.resize(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    const double m = sum[i] / dn;
    const double var = n > 1 ? std::max(0.0, (sumsq[i] - dn * m * m) / (dn - 1.0)) : 0.0;
    result.mean[i] = m;
    result.standard_error[i] = std::sqrt(var / dn);
  }
  if (want_rho) {
    result.averaged = QuantumState::density(rho / dn, end);
    track(*result.averaged, result.diagnostics);
    result.diagnostics.min_eigenvalue = check_state(*result.averaged).min_eigenvalue;
  } else {
    result.diagnostics.min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  }
  result.diagnostics.accepted_steps = engine.accepted();
  result.diagnostics.rejected_steps = engine.rejected();
  result.diagnostics.wall_seconds = seconds_since(t0);
  return result;
}

}  // namespace eitgate
