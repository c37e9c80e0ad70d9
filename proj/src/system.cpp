#include "eitgate/system.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace eitgate {

CompositeSystem::CompositeSystem(std::vector<LevelScheme> sites, Geometry geometry,
                                 InteractionSpec interaction, bool suppress_target_pairs)
    : sites_(std::move(sites)),
      geometry_(std::move(geometry)),
      interaction_(interaction),
      suppress_target_pairs_(suppress_target_pairs) {
  if (sites_.empty()) throw ModelError("composite system needs at least one site");
  if (geometry_.size() != sites_.size()) {
    throw ModelError("geometry has " + std::to_string(geometry_.size()) + " sites but " +
                     std::to_string(sites_.size()) + " schemes were given");
  }
  interaction_.validate();
  strides_.assign(sites_.size(), 1);
  for (std::size_t s = sites_.size(); s-- > 0;) {
    strides_[s] = dimension_;
    dimension_ *= sites_[s].dimension();
  }
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    for (std::size_t j = i + 1; j < sites_.size(); ++j) {
      if (suppress_target_pairs_ && i != 0) continue;
      const double v = interaction_strength(interaction_, geometry_.distance(i, j));
      if (v != 0.0) pairs_.push_back({i, j, v});
    }
  }
}

std::size_t CompositeSystem::index_of(const std::vector<std::string>& labels) const {
  if (labels.size() != sites_.size()) throw ModelError("one level label per site is required");
  std::size_t idx = 0;
  for (std::size_t s = 0; s < sites_.size(); ++s) idx += sites_[s].index_of(labels[s]) * strides_[s];
  return idx;
}

std::string CompositeSystem::basis_label(std::size_t index) const {
  std::string out;
  for (std::size_t s = 0; s < sites_.size(); ++s) {
    if (s) out += ',';
    out += sites_[s].levels()[local_index(index, s)].label;
  }
  return out;
}

std::vector<std::size_t> CompositeSystem::indices_with(std::size_t site, std::size_t level) const {
  std::vector<std::size_t> out;
  out.reserve(dimension_ / sites_[site].dimension());
  for (std::size_t m = 0; m < dimension_; ++m) {
    if (local_index(m, site) == level) out.push_back(m);
  }
  return out;
}

std::vector<JumpOperator> build_jump_operators(const CompositeSystem& system) {
  std::vector<JumpOperator> out;
  for (std::size_t s = 0; s < system.num_sites(); ++s) {
    const auto& scheme = system.site(s);
    for (const auto& d : scheme.decays()) {
      if (d.rate <= 0.0) continue;
      out.push_back({s, scheme.index_of(d.from), scheme.index_of(d.to), d.rate,
                     "site" + std::to_string(s) + ":" + d.from + "->" + d.to});
    }
  }
  return out;
}

SparseOp jump_matrix(const CompositeSystem& system, const JumpOperator& jump) {
  const auto from = system.indices_with(jump.site, jump.from);
  const long offset = (static_cast<long>(jump.to) - static_cast<long>(jump.from)) *
                      static_cast<long>(system.stride(jump.site));
  std::vector<Eigen::Triplet<cd>> trips;
  const double amp = std::sqrt(jump.rate);
  for (auto m : from) trips.emplace_back(static_cast<long>(m) + offset, m, amp);
  const auto n = static_cast<Eigen::Index>(system.dimension());
  SparseOp op(n, n);
  op.setFromTriplets(trips.begin(), trips.end());
  return op;
}

namespace {

struct Entry {
  Eigen::Index row;
  Eigen::Index col;
  cd value;
};

// Embeds a site-local matrix element <a|O|b> into the composite space.
void embed(const CompositeSystem& sys, std::size_t site, std::size_t a, std::size_t b, cd value,
           std::vector<Entry>& out) {
  const long offset =
      (static_cast<long>(a) - static_cast<long>(b)) * static_cast<long>(sys.stride(site));
  for (auto m : sys.indices_with(site, b)) {
    out.push_back({static_cast<long>(m) + offset, static_cast<Eigen::Index>(m), value});
  }
}

void scatter(const SparseOp& pattern, const std::vector<Entry>& entries, Eigen::VectorXcd& values) {
  values.setZero(pattern.nonZeros());
  const auto* outer = pattern.outerIndexPtr();
  const auto* inner = pattern.innerIndexPtr();
  for (const auto& e : entries) {
    const auto* first = inner + outer[e.row];
    const auto* last = inner + outer[e.row + 1];
    const auto* it = std::lower_bound(first, last, static_cast<int>(e.col));
    values[it - inner] += e.value;
  }
}

}  // namespace

SegmentOperator::SegmentOperator(const CompositeSystem& sys, const Segment* segment,
                                 bool include_loss) {
  const auto n = static_cast<Eigen::Index>(sys.dimension());
  start_ = segment ? segment->start : 0.0;

  std::vector<Entry> stat;
  // Diagonal: level energies, decay and pair interactions.
  for (std::size_t m = 0; m < sys.dimension(); ++m) {
    cd diag = 0.0;
    for (std::size_t s = 0; s < sys.num_sites(); ++s) {
      const auto& lvl = sys.site(s).levels()[sys.local_index(m, s)];
      diag += lvl.energy_offset;
      if (include_loss) diag -= cd(0.0, 0.5 * sys.site(s).total_decay(lvl.label));
    }
    for (const auto& p : sys.pair_terms()) {
      const auto& li = sys.site(p.i).levels()[sys.local_index(m, p.i)];
      const auto& lj = sys.site(p.j).levels()[sys.local_index(m, p.j)];
      if (li.category == LevelCategory::Rydberg && lj.category == LevelCategory::Rydberg) {
        diag += p.strength;
      }
    }
    stat.push_back({static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m), diag});
  }

  using Key = std::tuple<int, double, int>;  // envelope kind, duration, power
  std::map<Key, std::vector<Entry>> grouped;

  if (segment && segment->kind == SegmentKind::Drive) {
    for (const auto& sh : segment->shifts) {
      if (sh.site >= sys.num_sites()) throw ModelError("level shift on nonexistent site");
      const auto lvl = sys.site(sh.site).index_of(sh.level);
      embed(sys, sh.site, lvl, lvl, sh.shift, stat);
    }
    for (const auto& d : segment->drives) {
      if (d.site >= sys.num_sites()) throw ModelError("drive on nonexistent site");
      if (!segment->addresses(d.site)) {
        throw ModelError("beam '" + d.beam + "' is active on site " + std::to_string(d.site) +
                         " which segment '" + segment->label + "' masks off");
      }
      const auto& scheme = sys.site(d.site);
      const double amp = d.scale * d.envelope.peak;
      const bool constant = d.envelope.kind == EnvelopeKind::Constant &&
                            d.envelope.duration >= segment->duration;
      auto& lin = constant ? stat
                           : grouped[{static_cast<int>(d.envelope.kind), d.envelope.duration, 1}];
      for (const auto& c : scheme.couplings()) {
        if (c.envelope_id != d.beam) continue;
        const cd half = 0.5 * amp * c.peak_rabi * std::polar(1.0, c.phase);
        const auto lo = scheme.index_of(c.lower), up = scheme.index_of(c.upper);
        embed(sys, d.site, up, lo, half, lin);
        embed(sys, d.site, lo, up, std::conj(half), lin);
      }
      auto& quad = constant ? stat
                            : grouped[{static_cast<int>(d.envelope.kind), d.envelope.duration, 2}];
      for (const auto& sb : scheme.sideband_shifts()) {
        if (sb.envelope_id != d.beam) continue;
        const auto lvl = scheme.index_of(sb.level);
        embed(sys, d.site, lvl, lvl, amp * amp * sb.peak_shift, quad);
      }
    }
  }

  std::vector<Eigen::Triplet<cd>> trips;
  auto add_pattern = [&](const std::vector<Entry>& es) {
    for (const auto& e : es) trips.emplace_back(e.row, e.col, 1.0);
  };
  add_pattern(stat);
  for (const auto& [key, es] : grouped) add_pattern(es);
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  scatter(pattern_, stat, static_values_);
  for (const auto& [key, es] : grouped) {
    Group g;
    g.envelope = {static_cast<EnvelopeKind>(std::get<0>(key)), std::get<1>(key), 1.0};
    g.power = std::get<2>(key);
    scatter(pattern_, es, g.values);
    groups_.push_back(std::move(g));
  }
  Eigen::Map<Eigen::VectorXcd>(pattern_.valuePtr(), pattern_.nonZeros()) = static_values_;
}

void SegmentOperator::evaluate(double t, SparseOp& work) const {
  Eigen::Map<Eigen::VectorXcd> v(work.valuePtr(), work.nonZeros());
  v = static_values_;
  const double local = t - start_;
  for (const auto& g : groups_) {
    double f = g.envelope.value(local);
    if (g.power == 2) f *= f;
    if (f != 0.0) v += f * g.values;
  }
}

SparseOp build_hamiltonian(const CompositeSystem& system, const PulseSequence& sequence,
                           double t) {
  const double end = sequence.total_duration();
  if (t < 0.0 || t > end + 1e-15) throw ModelError("time outside the pulse sequence span");
  const Segment* active = nullptr;
  for (const auto& s : sequence.segments()) {
    if (s.kind == SegmentKind::Drive && t >= s.start && t <= s.end()) {
      active = &s;
      break;
    }
  }
  SegmentOperator op(system, active, false);
  SparseOp h = op.pattern();
  op.evaluate(t, h);
  return h;
}

Eigen::Matrix2cd gate_matrix(GateKind gate, double angle) {
  Eigen::Matrix2cd u;
  if (gate == GateKind::X) {
    const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
    u << c, cd(0.0, -s), cd(0.0, -s), c;
  } else {
    u << 1.0, 0.0, 0.0, std::polar(1.0, angle);
  }
  return u;
}

namespace {

std::pair<std::vector<std::size_t>, long> qubit_pairs(const CompositeSystem& sys,
                                                      std::size_t site) {
  const auto& scheme = sys.site(site);
  const auto i0 = scheme.index_of("q0"), i1 = scheme.index_of("q1");
  const long offset =
      (static_cast<long>(i1) - static_cast<long>(i0)) * static_cast<long>(sys.stride(site));
  return {sys.indices_with(site, i0), offset};
}

}  // namespace

void apply_local_unitary(const CompositeSystem& sys, std::size_t site, const Eigen::Matrix2cd& u,
                         Eigen::VectorXcd& psi) {
  const auto [zeros, offset] = qubit_pairs(sys, site);
  for (auto m0 : zeros) {
    const auto m1 = static_cast<Eigen::Index>(m0) + offset;
    const cd a = psi[m0], b = psi[m1];
    psi[m0] = u(0, 0) * a + u(0, 1) * b;
    psi[m1] = u(1, 0) * a + u(1, 1) * b;
  }
}

void apply_local_unitary(const CompositeSystem& sys, std::size_t site, const Eigen::Matrix2cd& u,
                         Eigen::MatrixXcd& rho) {
  const auto [zeros, offset] = qubit_pairs(sys, site);
  const Eigen::Matrix2cd ua = u.adjoint();
  for (auto m0 : zeros) {
    const auto m1 = static_cast<Eigen::Index>(m0) + offset;
    const Eigen::RowVectorXcd a = rho.row(m0), b = rho.row(m1);
    rho.row(m0) = u(0, 0) * a + u(0, 1) * b;
    rho.row(m1) = u(1, 0) * a + u(1, 1) * b;
  }
  for (auto m0 : zeros) {
    const auto m1 = static_cast<Eigen::Index>(m0) + offset;
    const Eigen::VectorXcd a = rho.col(m0), b = rho.col(m1);
    rho.col(m0) = a * ua(0, 0) + b * ua(1, 0);
    rho.col(m1) = a * ua(0, 1) + b * ua(1, 1);
  }
}

}  // namespace eitgate
