// Copyright 2026 The qpsi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Minimal pure-state simulator for the M-qubit registers and the two-qubit
 * key-generation pairs.
 *
 * Qubit numbering: qubit 0 is the most significant bit of the basis index, so
 * |j> = |k_1 k_2 ... k_M> with k_1 carried by qubit 0.
 */
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qpsi/rng.hpp"

namespace qpsi {

using Amplitude = std::complex<double>;

inline constexpr double kStateTolerance = 1e-9;
inline constexpr double kAlgebraTolerance = 1e-12;
inline constexpr std::size_t kMaxQubits = 12;

/// Raised when a register's support leaves the two-dimensional subspace an
/// operation expects.
class CorruptRegister : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Statevector {
 public:
  Statevector(std::size_t num_qubits, std::vector<Amplitude> amplitudes)
      : num_qubits_(num_qubits), amplitudes_(std::move(amplitudes)) {
    if (num_qubits_ < 1 || num_qubits_ > kMaxQubits) {
      throw std::invalid_argument("qubit count must be in [1, " +
                                  std::to_string(kMaxQubits) + "]");
    }
    if (amplitudes_.size() != (std::size_t{1} << num_qubits_)) {
      throw std::invalid_argument("amplitude vector length must be 2^num_qubits");
    }
    if (std::abs(norm_squared() - 1.0) > kStateTolerance) {
      throw std::invalid_argument("state is not normalized");
    }
  }

  static Statevector basis(std::size_t num_qubits, std::size_t index) {
    if (num_qubits < 1 || num_qubits > kMaxQubits) {
      throw std::invalid_argument("qubit count out of range");
    }
    std::vector<Amplitude> amps(std::size_t{1} << num_qubits);
    if (index >= amps.size()) throw std::out_of_range("basis index out of range");
    amps[index] = 1.0;
    return Statevector(num_qubits, std::move(amps));
  }

  std::size_t num_qubits() const { return num_qubits_; }
  std::size_t dimension() const { return amplitudes_.size(); }
  std::span<const Amplitude> amplitudes() const { return amplitudes_; }
  const Amplitude& operator[](std::size_t i) const { return amplitudes_[i]; }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : amplitudes_) s += std::norm(a);
    return s;
  }
  double norm() const { return std::sqrt(norm_squared()); }

  // Basis indices carrying probability above tol.
  std::vector<std::size_t> support(double tol = kStateTolerance) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
      if (std::norm(amplitudes_[i]) > tol * tol) out.push_back(i);
    }
    return out;
  }

 private:
  std::size_t num_qubits_;
  std::vector<Amplitude> amplitudes_;
};

inline bool approx_equal(const Statevector& a, const Statevector& b,
                         double tol = kAlgebraTolerance) {
  if (a.num_qubits() != b.num_qubits()) return false;
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

inline std::size_t qubit_mask(std::size_t num_qubits, std::size_t qubit) {
  if (qubit >= num_qubits) throw std::out_of_range("qubit index out of range");
  return std::size_t{1} << (num_qubits - 1 - qubit);
}

// Row-major 2x2 single-qubit operator.
using Gate2 = std::array<Amplitude, 4>;

namespace gates {
inline const Gate2 kIdentity{1.0, 0.0, 0.0, 1.0};
inline const Gate2 kPauliX{0.0, 1.0, 1.0, 0.0};
inline const Gate2 kPauliY{0.0, Amplitude(0, -1), Amplitude(0, 1), 0.0};
inline const Gate2 kPauliZ{1.0, 0.0, 0.0, -1.0};
}  // namespace gates

inline Statevector apply_single_qubit(const Statevector& state, std::size_t qubit,
                                      const Gate2& g) {
  const std::size_t mask = qubit_mask(state.num_qubits(), qubit);
  std::vector<Amplitude> out(state.amplitudes().begin(), state.amplitudes().end());
  for (std::size_t i0 = 0; i0 < out.size(); ++i0) {
    if (i0 & mask) continue;
    const std::size_t i1 = i0 | mask;
    const Amplitude a0 = state[i0], a1 = state[i1];
    out[i0] = g[0] * a0 + g[1] * a1;
    out[i1] = g[2] * a0 + g[3] * a1;
  }
  return Statevector(state.num_qubits(), std::move(out));
}

inline Statevector apply_swap(const Statevector& state, std::size_t a, std::size_t b) {
  const std::size_t ma = qubit_mask(state.num_qubits(), a);
  const std::size_t mb = qubit_mask(state.num_qubits(), b);
  std::vector<Amplitude> out(state.dimension());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t k = i;
    const bool ba = (i & ma) != 0, bb = (i & mb) != 0;
    if (ba != bb) k ^= (ma | mb);
    out[k] = state[i];
  }
  return Statevector(state.num_qubits(), std::move(out));
}

inline Statevector apply_cnot(const Statevector& state, std::size_t control,
                              std::size_t target) {
  if (control == target) throw std::invalid_argument("control equals target");
  const std::size_t mc = qubit_mask(state.num_qubits(), control);
  const std::size_t mt = qubit_mask(state.num_qubits(), target);
  std::vector<Amplitude> out(state.dimension());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[(i & mc) ? (i ^ mt) : i] = state[i];
  }
  return Statevector(state.num_qubits(), std::move(out));
}

// |a>|b>, with a occupying the most significant qubits.
inline Statevector tensor(const Statevector& a, const Statevector& b) {
  std::vector<Amplitude> out(a.dimension() * b.dimension());
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    for (std::size_t j = 0; j < b.dimension(); ++j) {
      out[i * b.dimension() + j] = a[i] * b[j];
    }
  }
  return Statevector(a.num_qubits() + b.num_qubits(), std::move(out));
}

// ---------------------------------------------------------------------------
// Membership tables.

/// Bit per index j in [0, N-1]; entry 0 is pinned to 0.
class BitTable {
 public:
  explicit BitTable(std::vector<std::uint8_t> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw std::invalid_argument("empty table");
    if (entries_[0] != 0) throw std::invalid_argument("table entry at index 0 must be 0");
    for (auto b : entries_) {
      if (b > 1) throw std::invalid_argument("table entries must be bits");
    }
  }
  static BitTable zeros(std::size_t modulus) {
    return BitTable(std::vector<std::uint8_t>(modulus, 0));
  }

  std::size_t modulus() const { return entries_.size(); }
  std::uint8_t operator[](std::size_t j) const { return entries_.at(j); }
  std::span<const std::uint8_t> entries() const { return entries_; }

  bool operator==(const BitTable&) const = default;

 private:
  std::vector<std::uint8_t> entries_;
};

// ---------------------------------------------------------------------------
// Register preparation, oracle and reduction.

/// (|0> + sign |j>)/sqrt(2) on M qubits.
inline Statevector superposition_register(std::size_t j, std::size_t num_qubits,
                                          int sign = +1) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  if (num_qubits < 1 || num_qubits > kMaxQubits) {
    throw std::invalid_argument("qubit count out of range");
  }
  const std::size_t dim = std::size_t{1} << num_qubits;
  if (j == 0 || j >= dim) throw std::invalid_argument("element index must be in [1, 2^M - 1]");
  std::vector<Amplitude> amps(dim);
  amps[0] = std::numbers::sqrt2 / 2.0;
  amps[j] = static_cast<double>(sign) * std::numbers::sqrt2 / 2.0;
  return Statevector(num_qubits, std::move(amps));
}

/// Diagonal oracle: amplitude j picks up (-1)^{q(j)}. Indices at or above the
/// table modulus are left untouched.
inline Statevector apply_oracle(const Statevector& state, const BitTable& q) {
  if (state.dimension() < q.modulus()) {
    throw std::invalid_argument("register dimension smaller than table modulus");
  }
  std::vector<Amplitude> out(state.amplitudes().begin(), state.amplitudes().end());
  for (std::size_t j = 0; j < q.modulus(); ++j) {
    if (q[j]) out[j] = -out[j];
  }
  return Statevector(state.num_qubits(), std::move(out));
}

// Gate sequence mapping |j> to |10...0> while fixing |0...0>: SWAP the first
// set bit into qubit 0, then CNOT from qubit 0 onto every other set bit.
inline Statevector apply_reduction_circuit(const Statevector& state, std::size_t j) {
  const std::size_t m = state.num_qubits();
  if (j == 0 || j >= state.dimension()) throw std::invalid_argument("element index out of range");
  std::vector<std::size_t> ones;
  for (std::size_t q = 0; q < m; ++q) {
    if (j & qubit_mask(m, q)) ones.push_back(q);
  }
  Statevector out = state;
  if (ones.front() != 0) out = apply_swap(out, 0, ones.front());
  for (std::size_t k = 1; k < ones.size(); ++k) out = apply_cnot(out, 0, ones[k]);
  return out;
}

/// Reduces (|0> + s|j>)/sqrt(2) to (|0...0> + s|10...0>)/sqrt(2).
inline Statevector reduce_to_plus_minus(const Statevector& state, std::size_t j) {
  if (j == 0 || j >= state.dimension()) throw std::invalid_argument("element index out of range");
  for (std::size_t i : state.support()) {
    if (i != 0 && i != j) {
      throw CorruptRegister("register support leaves span{|0>, |" + std::to_string(j) + ">}");
    }
  }
  return apply_reduction_circuit(state, j);
}

// ---------------------------------------------------------------------------
// Measurement.

/// Full-register computational basis.
struct ComputationalBasis {};

/// {(|0>+|j>)/sqrt2, (|0>-|j>)/sqrt2} completed by the remaining computational
/// states in ascending order. Outcomes: 0 = "+", 1 = "-", 2.. = "corrupt:<k>".
struct PairBasis {
  std::size_t j;
};

/// Orthonormal basis {first, second} applied to a single qubit.
struct QubitBasis {
  std::size_t qubit;
  std::array<Amplitude, 2> first;
  std::array<Amplitude, 2> second;
  std::string first_label;
  std::string second_label;
};

using MeasurementBasis = std::variant<ComputationalBasis, PairBasis, QubitBasis>;

enum class PhiBasis { kPhi0, kPhi1 };

/// |phi0> = cos(t/2)|0> + sin(t/2)|1>, |phi1> = cos(t/2)|0> - sin(t/2)|1>.
inline std::array<Amplitude, 2> phi_state(double theta, PhiBasis which) {
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  return which == PhiBasis::kPhi0 ? std::array<Amplitude, 2>{c, s}
                                  : std::array<Amplitude, 2>{c, -s};
}

inline QubitBasis computational_qubit_basis(std::size_t qubit) {
  return {qubit, {1.0, 0.0}, {0.0, 1.0}, "0", "1"};
}

inline QubitBasis plus_minus_basis(std::size_t qubit) {
  const double h = std::numbers::sqrt2 / 2.0;
  return {qubit, {h, h}, {h, -h}, "+", "-"};
}

inline QubitBasis phi_basis(double theta, PhiBasis which, std::size_t qubit) {
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  if (which == PhiBasis::kPhi0) return {qubit, {c, s}, {s, -c}, "phi0", "phi0_perp"};
  return {qubit, {c, -s}, {s, c}, "phi1", "phi1_perp"};
}

// Optimal equal-prior discrimination of |phi0> vs |phi1>: both sit
// symmetrically about |0> in the real plane, so the Helstrom projectors are
// |+> (guess phi0) and |-> (guess phi1) for every theta.
inline QubitBasis helstrom_basis(std::size_t qubit) {
  const double h = std::numbers::sqrt2 / 2.0;
  return {qubit, {h, h}, {h, -h}, "guess_phi0", "guess_phi1"};
}

struct Measurement {
  std::size_t outcome;
  std::string label;
  Statevector state;
};

namespace detail {

inline void check_basis(const Statevector& state, const MeasurementBasis& basis) {
  if (const auto* p = std::get_if<PairBasis>(&basis)) {
    if (p->j == 0 || p->j >= state.dimension()) {
      throw std::invalid_argument("pair basis index incompatible with register");
    }
  } else if (const auto* q = std::get_if<QubitBasis>(&basis)) {
    if (q->qubit >= state.num_qubits()) throw std::invalid_argument("basis qubit out of range");
  }
}

inline std::vector<std::size_t> pair_complement(std::size_t j, std::size_t dim) {
  std::vector<std::size_t> rest;
  for (std::size_t k = 1; k < dim; ++k) {
    if (k != j) rest.push_back(k);
  }
  return rest;
}

// Projects `qubit` onto `v` and returns the unnormalized result.
inline std::vector<Amplitude> project_qubit(const Statevector& state, std::size_t qubit,
                                            const std::array<Amplitude, 2>& v) {
  const std::size_t mask = qubit_mask(state.num_qubits(), qubit);
  std::vector<Amplitude> out(state.dimension());
  for (std::size_t i0 = 0; i0 < out.size(); ++i0) {
    if (i0 & mask) continue;
    const std::size_t i1 = i0 | mask;
    const Amplitude c = std::conj(v[0]) * state[i0] + std::conj(v[1]) * state[i1];
    out[i0] = v[0] * c;
    out[i1] = v[1] * c;
  }
  return out;
}

inline double squared_norm(const std::vector<Amplitude>& v) {
  double s = 0.0;
  for (const auto& a : v) s += std::norm(a);
  return s;
}

}  // namespace detail

/// Born-rule probabilities of every outcome of `basis`, indexed by outcome.
inline std::vector<double> outcome_probabilities(const Statevector& state,
                                                 const MeasurementBasis& basis) {
  detail::check_basis(state, basis);
  std::vector<double> probs;
  if (std::holds_alternative<ComputationalBasis>(basis)) {
    for (const auto& a : state.amplitudes()) probs.push_back(std::norm(a));
  } else if (const auto* p = std::get_if<PairBasis>(&basis)) {
    const double h = std::numbers::sqrt2 / 2.0;
    probs.push_back(std::norm(h * (state[0] + state[p->j])));
    probs.push_back(std::norm(h * (state[0] - state[p->j])));
    for (std::size_t k : detail::pair_complement(p->j, state.dimension())) {
      probs.push_back(std::norm(state[k]));
    }
  } else {
    const auto& q = std::get<QubitBasis>(basis);
    probs.push_back(detail::squared_norm(detail::project_qubit(state, q.qubit, q.first)));
    probs.push_back(detail::squared_norm(detail::project_qubit(state, q.qubit, q.second)));
  }
  return probs;
}

/// Samples an outcome by the Born rule and returns the collapsed state.
inline Measurement measure(const Statevector& state, const MeasurementBasis& basis, Rng& rng) {
  const std::vector<double> probs = outcome_probabilities(state, basis);
  double u = uniform01(rng);
  std::size_t outcome = probs.size() - 1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (u < probs[i]) {
      outcome = i;
      break;
    }
    u -= probs[i];
  }
  // Rounding can leave u past the last positive entry.
  if (probs[outcome] <= 0.0) {
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) {
        outcome = i;
        break;
      }
    }
  }

  const std::size_t m = state.num_qubits();
  const std::size_t dim = state.dimension();
  if (std::holds_alternative<ComputationalBasis>(basis)) {
    const Amplitude a = state[outcome];
    std::vector<Amplitude> amps(dim);
    amps[outcome] = a / std::abs(a);
    return {outcome, std::to_string(outcome), Statevector(m, std::move(amps))};
  }
  if (const auto* p = std::get_if<PairBasis>(&basis)) {
    std::vector<Amplitude> amps(dim);
    if (outcome < 2) {
      const double h = std::numbers::sqrt2 / 2.0;
      const double sign = outcome == 0 ? 1.0 : -1.0;
      const Amplitude overlap = h * (state[0] + sign * state[p->j]);
      const Amplitude phase = overlap / std::abs(overlap);
      amps[0] = h * phase;
      amps[p->j] = sign * h * phase;
      return {outcome, outcome == 0 ? "+" : "-", Statevector(m, std::move(amps))};
    }
    const std::size_t k = detail::pair_complement(p->j, dim)[outcome - 2];
    amps[k] = state[k] / std::abs(state[k]);
    return {outcome, "corrupt:" + std::to_string(k), Statevector(m, std::move(amps))};
  }
  const auto& q = std::get<QubitBasis>(basis);
  std::vector<Amplitude> amps =
      detail::project_qubit(state, q.qubit, outcome == 0 ? q.first : q.second);
  const double scale = 1.0 / std::sqrt(detail::squared_norm(amps));
  for (auto& a : amps) a *= scale;
  return {outcome, outcome == 0 ? q.first_label : q.second_label, Statevector(m, std::move(amps))};
}

// ---------------------------------------------------------------------------

/// Optimal probability of telling |phi0> from |phi1> with equal priors.
inline double helstrom_guess_probability(double theta) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi / 2.0 + kAlgebraTolerance)) {
    throw std::domain_error("theta must lie in [0, pi/2]");
  }
  return 0.5 + 0.5 * std::sin(theta);
}

}  // namespace qpsi
