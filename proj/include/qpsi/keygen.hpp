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
 * Entanglement-based key generation. Bob ends up with an l-bit stream; Alice
 * learns the bits at the positions where her unambiguous measurement was
 * conclusive.
 *
 * Pair layout: qubit 0 is Bob's, qubit 1 is Alice's.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qpsi/rng.hpp"
#include "qpsi/stats.hpp"
#include "qpsi/statevec.hpp"

namespace qpsi {

inline constexpr std::size_t kBobQubit = 0;
inline constexpr std::size_t kAliceQubit = 1;

struct PairSource {
  double theta = std::numbers::pi / 4.0;
  // Depolarizing probability on Alice's qubit.
  double noise = 0.0;

  void validate() const {
    if (!(theta >= 0.0 && theta <= std::numbers::pi / 2.0 + kAlgebraTolerance)) {
      throw std::domain_error("theta must lie in [0, pi/2]");
    }
    if (!(noise >= 0.0 && noise <= 1.0)) throw std::domain_error("noise must lie in [0, 1]");
  }
};

/// (|0>|phi0> + |1>|phi1>)/sqrt2, then with probability `noise` a uniformly
/// random Pauli on Alice's qubit (a full twirl, i.e. depolarization).
inline Statevector make_entangled_pair(const PairSource& source, Rng& rng) {
  source.validate();
  const auto phi0 = phi_state(source.theta, PhiBasis::kPhi0);
  const auto phi1 = phi_state(source.theta, PhiBasis::kPhi1);
  const double h = std::numbers::sqrt2 / 2.0;
  Statevector pair(2, {h * phi0[0], h * phi0[1], h * phi1[0], h * phi1[1]});
  if (source.noise > 0.0 && bernoulli(rng, source.noise)) {
    static const std::array<Gate2, 4> kPaulis{gates::kIdentity, gates::kPauliX,
                                              gates::kPauliY, gates::kPauliZ};
    pair = apply_single_qubit(pair, kAliceQubit, kPaulis[uniform_int<std::size_t>(rng, 0, 3)]);
  }
  return pair;
}

/// Fraction of pairs on which Alice's unambiguous measurement is conclusive.
inline double conclusive_rate(double theta) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi / 2.0 + kAlgebraTolerance)) {
    throw std::domain_error("theta must lie in [0, pi/2]");
  }
  const double s = std::sin(theta);
  return s * s / 2.0;
}

enum class AliceKeygenMode {
  kUnambiguous,  // honest: random phi0/phi1 basis, keep only perp outcomes
  kHelstrom,     // guessing attack: optimal discrimination on every pair
};

struct KeygenOptions {
  double abort_threshold = 0.05;
  AliceKeygenMode alice_mode = AliceKeygenMode::kUnambiguous;
  // Bob's prediction of whether Alice's outcome on a pair is conclusive,
  // given his own bit.
  std::function<bool(std::uint8_t bob_bit)> bob_guesser;
};

struct KeyMaterial {
  std::size_t length = 0;
  std::vector<std::uint8_t> bob_bits;               // r_1..r_l at indices 0..l-1
  std::map<std::size_t, std::uint8_t> alice_known;  // index -> bit
  std::vector<std::uint8_t> alice_guesses;          // Helstrom mode only
  double theta = 0.0;
  double error_rate = 0.0;
  bool aborted = false;

  // Diagnostics over all 2l generated pairs.
  std::size_t pairs = 0;
  std::size_t conclusive_pairs = 0;
  std::size_t sampled_conclusive = 0;
  std::size_t sampled_errors = 0;
  std::size_t bob_guesses_correct = 0;

  double known_fraction() const {
    return length == 0 ? 0.0 : static_cast<double>(alice_known.size()) / static_cast<double>(length);
  }
};

namespace detail {

struct PairRecord {
  std::uint8_t bob_bit = 0;
  bool conclusive = false;
  std::uint8_t alice_bit = 0;
};

inline PairRecord run_pair(const PairSource& source, AliceKeygenMode mode, Rng& rng) {
  Statevector pair = make_entangled_pair(source, rng);
  Measurement bob = measure(pair, computational_qubit_basis(kBobQubit), rng);
  PairRecord rec;
  rec.bob_bit = static_cast<std::uint8_t>(bob.outcome);
  if (mode == AliceKeygenMode::kHelstrom) {
    Measurement alice = measure(bob.state, helstrom_basis(kAliceQubit), rng);
    rec.alice_bit = static_cast<std::uint8_t>(alice.outcome);
    return rec;
  }
  const PhiBasis basis = bernoulli(rng, 0.5) ? PhiBasis::kPhi1 : PhiBasis::kPhi0;
  Measurement alice = measure(bob.state, phi_basis(source.theta, basis, kAliceQubit), rng);
  if (alice.outcome == 1) {
    // phi0_perp rules out r = 0; phi1_perp rules out r = 1.
    rec.conclusive = true;
    rec.alice_bit = basis == PhiBasis::kPhi0 ? 1 : 0;
  }
  return rec;
}

}  // namespace detail

/// Generates 2l pairs, spends a random half on error estimation and retains
/// the other half as the key stream.
inline KeyMaterial run_keygen(std::size_t length, const PairSource& source, Rng& rng,
                              const KeygenOptions& options = {}) {
  if (length < 1) throw std::invalid_argument("key length must be at least 1");
  source.validate();
  const std::size_t total = 2 * length;

  KeyMaterial key;
  key.length = length;
  key.theta = source.theta;
  key.pairs = total;

  std::vector<detail::PairRecord> records;
  records.reserve(total);
  for (std::size_t t = 0; t < total; ++t) {
    detail::PairRecord rec = detail::run_pair(source, options.alice_mode, rng);
    if (rec.conclusive) ++key.conclusive_pairs;
    if (options.bob_guesser && options.bob_guesser(rec.bob_bit) == rec.conclusive) {
      ++key.bob_guesses_correct;
    }
    records.push_back(rec);
  }

  std::vector<std::size_t> positions(total);
  for (std::size_t i = 0; i < total; ++i) positions[i] = i;
  std::vector<std::size_t> sample = sample_without_replacement(positions, length, rng);
  std::vector<bool> sampled(total, false);
  for (std::size_t i : sample) {
    sampled[i] = true;
    if (records[i].conclusive) {
      ++key.sampled_conclusive;
      if (records[i].alice_bit != records[i].bob_bit) ++key.sampled_errors;
    }
  }
  key.error_rate = key.sampled_conclusive == 0
                       ? 0.0
                       : static_cast<double>(key.sampled_errors) /
                             static_cast<double>(key.sampled_conclusive);
  key.aborted = key.error_rate > options.abort_threshold;

  key.bob_bits.reserve(length);
  for (std::size_t i = 0; i < total; ++i) {
    if (sampled[i]) continue;
    const std::size_t t = key.bob_bits.size();
    key.bob_bits.push_back(records[i].bob_bit);
    if (options.alice_mode == AliceKeygenMode::kHelstrom) {
      key.alice_guesses.push_back(records[i].alice_bit);
    } else if (records[i].conclusive) {
      key.alice_known.emplace(t, records[i].alice_bit);
    }
  }
  return key;
}

/// Outcome of Bob's attempt to predict where Alice is conclusive.
struct AdvantageEstimate {
  // Balanced accuracy (mean of per-class recall) on held-out pairs. A
  // predictor with no information scores 1/2 regardless of class imbalance.
  double estimate = 0.5;
  double sigma = 0.0;  // standard error at the no-information benchmark
  double raw_accuracy = 0.0;
  double correlation = 0.0;  // Pearson r between Bob's bit and the indicator
  double correlation_sigma = 0.0;
  bool degenerate = false;  // indicator constant: nothing to predict
};

/// Best predictor of Alice's conclusive indicator from Bob's one-bit view,
/// fitted on the first half of `trials` pairs and scored on the second.
inline AdvantageEstimate bob_conclusiveness_advantage(std::size_t trials, double theta, Rng& rng) {
  if (trials < 1000) throw std::invalid_argument("at least 1000 trials required");
  PairSource source{theta, 0.0};
  source.validate();

  std::vector<detail::PairRecord> recs;
  recs.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    recs.push_back(detail::run_pair(source, AliceKeygenMode::kUnambiguous, rng));
  }

  AdvantageEstimate out;
  const std::size_t half = trials / 2;

  // Frequency table over the training half.
  std::array<stats::Proportion, 2> given_bit{};
  stats::Proportion overall;
  for (std::size_t i = 0; i < half; ++i) {
    given_bit[recs[i].bob_bit].add(recs[i].conclusive);
    overall.add(recs[i].conclusive);
  }
  std::array<bool, 2> predict{};
  for (int r = 0; r < 2; ++r) predict[r] = given_bit[r].mean() > overall.mean();

  std::uint64_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t i = half; i < trials; ++i) {
    const bool guess = predict[recs[i].bob_bit];
    if (recs[i].conclusive) {
      ++pos;
      if (guess) ++tp;
    } else {
      ++neg;
      if (!guess) ++tn;
    }
  }
  out.raw_accuracy = static_cast<double>(tp + tn) / static_cast<double>(pos + neg);
  if (pos == 0 || neg == 0 || overall.hits == 0) {
    out.degenerate = true;
    out.estimate = 0.5;
  } else {
    out.estimate = 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) +
                          static_cast<double>(tn) / static_cast<double>(neg));
    out.sigma = 0.5 * std::sqrt(0.25 / static_cast<double>(pos) + 0.25 / static_cast<double>(neg));
  }

  double sr = 0, sc = 0, srr = 0, scc = 0, src = 0;
  for (const auto& rec : recs) {
    const double r = rec.bob_bit, c = rec.conclusive ? 1.0 : 0.0;
    sr += r;
    sc += c;
    srr += r * r;
    scc += c * c;
    src += r * c;
  }
  const double n = static_cast<double>(trials);
  const double cov = src / n - (sr / n) * (sc / n);
  const double vr = srr / n - (sr / n) * (sr / n);
  const double vc = scc / n - (sc / n) * (sc / n);
  out.correlation = (vr > 0 && vc > 0) ? cov / std::sqrt(vr * vc) : 0.0;
  out.correlation_sigma = 1.0 / std::sqrt(n);
  return out;
}

/// Histogram of Alice's outcomes in `basis` on fresh pairs, either after Bob
/// has measured his half or with Bob's half left untouched.
inline std::array<std::uint64_t, 2> sample_alice_outcomes(const PairSource& source,
                                                          const QubitBasis& basis,
                                                          bool bob_measures_first,
                                                          std::size_t trials, Rng& rng) {
  if (basis.qubit != kAliceQubit) throw std::invalid_argument("basis must act on Alice's qubit");
  std::array<std::uint64_t, 2> counts{};
  for (std::size_t i = 0; i < trials; ++i) {
    Statevector pair = make_entangled_pair(source, rng);
    if (bob_measures_first) pair = measure(pair, computational_qubit_basis(kBobQubit), rng).state;
    ++counts[measure(pair, basis, rng).outcome];
  }
  return counts;
}

}  // namespace qpsi
