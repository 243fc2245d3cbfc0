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

#include "qpsi/statevec.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "generators.hpp"
#include "qpsi/stats.hpp"

namespace qpsi {
namespace {

constexpr double kH = std::numbers::sqrt2 / 2.0;

// Dense matrices, used only as an independent oracle for gate sequences.
using Matrix = std::vector<std::vector<Amplitude>>;

Matrix identity(std::size_t d) {
  Matrix m(d, std::vector<Amplitude>(d));
  for (std::size_t i = 0; i < d; ++i) m[i][i] = 1.0;
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  const std::size_t ra = a.size(), rb = b.size();
  Matrix out(ra * rb, std::vector<Amplitude>(ra * rb));
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < ra; ++j)
      for (std::size_t k = 0; k < rb; ++k)
        for (std::size_t l = 0; l < rb; ++l) out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) out[i][j] += b[i][j];
  return out;
}

std::vector<Amplitude> mat_vec(const Matrix& m, const std::vector<Amplitude>& v) {
  std::vector<Amplitude> out(v.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

Statevector from(std::size_t qubits, std::vector<std::pair<std::size_t, Amplitude>> entries) {
  std::vector<Amplitude> amps(std::size_t{1} << qubits);
  for (auto [i, a] : entries) amps[i] = a;
  return Statevector(qubits, std::move(amps));
}

TEST(SuperpositionRegister, PlacesEqualWeightsOnZeroAndJ) {
  auto s = superposition_register(2, 2, +1);
  ASSERT_EQ(s.dimension(), 4u);
  EXPECT_NEAR(s[0].real(), kH, 1e-15);
  EXPECT_EQ(s[1], Amplitude(0.0));
  EXPECT_NEAR(s[2].real(), kH, 1e-15);
  EXPECT_EQ(s[3], Amplitude(0.0));
}

TEST(SuperpositionRegister, NegativeSignLandsOnJ) {
  auto s = superposition_register(5, 4, -1);
  EXPECT_NEAR(s[0].real(), kH, 1e-15);
  EXPECT_NEAR(s[5].real(), -kH, 1e-15);
  EXPECT_EQ(s.support(), (std::vector<std::size_t>{0, 5}));
}

TEST(SuperpositionRegister, RejectsZeroAndOutOfRange) {
  EXPECT_THROW(superposition_register(0, 3, +1), std::invalid_argument);
  EXPECT_THROW(superposition_register(8, 3, +1), std::invalid_argument);
  EXPECT_THROW(superposition_register(1, 3, 2), std::invalid_argument);
}

TEST(Statevector, RejectsUnnormalizedAmplitudes) {
  EXPECT_THROW(Statevector(1, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(Statevector(2, {1.0, 0.0}), std::invalid_argument);
}

TEST(BitTable, IndexZeroMustBeClear) {
  EXPECT_THROW(BitTable({1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(BitTable({0, 2}), std::invalid_argument);
}

TEST(Oracle, FlipsSignWhereTableIsSet) {
  std::vector<std::uint8_t> q(16, 0);
  q[5] = 1;
  auto out = apply_oracle(superposition_register(5, 4, +1), BitTable(q));
  EXPECT_TRUE(approx_equal(out, superposition_register(5, 4, -1), kAlgebraTolerance));
}

TEST(Oracle, LeavesStateAloneWhereTableIsClear) {
  std::vector<std::uint8_t> q(16, 1);
  q[0] = 0;
  q[5] = 0;
  auto in = superposition_register(5, 4, +1);
  EXPECT_TRUE(approx_equal(apply_oracle(in, BitTable(q)), in, kAlgebraTolerance));
}

TEST(Oracle, ZeroRegisterIsFixedByEveryTable) {
  Rng rng = make_rng(11);
  auto zero = Statevector::basis(4, 0);
  for (int i = 0; i < 50; ++i) {
    EXPECT_TRUE(approx_equal(apply_oracle(zero, gen::bit_table(rng, 16)), zero, 0.0));
  }
}

TEST(Reduction, MatchesKroneckerProductOfSwapThenCnot) {
  // j = 5 = 0101 on four qubits, qubit 0 most significant.
  const Matrix I2 = identity(2);
  Matrix swap(4, std::vector<Amplitude>(4));
  swap[0][0] = swap[1][2] = swap[2][1] = swap[3][3] = 1.0;
  Matrix p0{{1.0, 0.0}, {0.0, 0.0}}, p1{{0.0, 0.0}, {0.0, 1.0}}, x{{0.0, 1.0}, {1.0, 0.0}};
  const Matrix swap01 = kron(kron(swap, I2), I2);
  const Matrix cnot03 = add(kron(kron(kron(p0, I2), I2), I2), kron(kron(kron(p1, I2), I2), x));

  const auto in = superposition_register(5, 4, +1);
  std::vector<Amplitude> v(in.amplitudes().begin(), in.amplitudes().end());
  const auto expected_amps = mat_vec(cnot03, mat_vec(swap01, v));
  const Statevector expected(4, expected_amps);

  EXPECT_TRUE(approx_equal(expected, from(4, {{0, kH}, {8, kH}}), kAlgebraTolerance));
  EXPECT_TRUE(approx_equal(reduce_to_plus_minus(in, 5), expected, kAlgebraTolerance));
}

TEST(Reduction, TopBitElementNeedsNoGates) {
  const auto in = superposition_register(8, 4, -1);
  EXPECT_TRUE(approx_equal(reduce_to_plus_minus(in, 8), in, 0.0));
}

TEST(Reduction, RejectsSupportOutsideThePair) {
  auto bad = from(3, {{0, std::sqrt(1.0 / 3.0)}, {3, std::sqrt(1.0 / 3.0)}, {5, std::sqrt(1.0 / 3.0)}});
  EXPECT_THROW(reduce_to_plus_minus(bad, 3), CorruptRegister);
}

TEST(Reduction, ExhaustiveForUpToSixQubits) {
  for (std::size_t m = 1; m <= 6; ++m) {
    const std::size_t top = std::size_t{1} << (m - 1);
    for (std::size_t j = 1; j < (std::size_t{1} << m); ++j) {
      for (int sign : {+1, -1}) {
        const auto out = reduce_to_plus_minus(superposition_register(j, m, sign), j);
        const auto want = from(m, {{0, kH}, {top, sign * kH}});
        ASSERT_TRUE(approx_equal(out, want, kAlgebraTolerance))
            << "m=" << m << " j=" << j << " sign=" << sign;
      }
    }
  }
}

TEST(OracleProperty, PreservesNormAndIsAnInvolution) {
  Rng rng = make_rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = gen::qubits(rng);
    const auto s = gen::dense_state(rng, m);
    const auto q = gen::bit_table(rng, std::size_t{1} << m);
    const auto once = apply_oracle(s, q);
    ASSERT_NEAR(once.norm(), 1.0, kAlgebraTolerance);
    ASSERT_TRUE(approx_equal(apply_oracle(once, q), s, kAlgebraTolerance));
  }
}

TEST(ReductionProperty, PreservesNormOnRandomPairStates) {
  Rng rng = make_rng(77);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = gen::qubits(rng);
    const std::size_t j = gen::element_index(rng, m);
    const auto s = gen::pair_state(rng, m, j);
    const auto r = reduce_to_plus_minus(s, j);
    ASSERT_NEAR(r.norm(), 1.0, kAlgebraTolerance);
    const std::size_t top = std::size_t{1} << (m - 1);
    // The circuit is a permutation fixing |0> and sending |j> to |top>.
    ASSERT_NEAR(std::abs(r[0] - s[0]), 0.0, kAlgebraTolerance);
    ASSERT_NEAR(std::abs(r[top] - s[j]), 0.0, kAlgebraTolerance);
  }
}

TEST(Measure, PlusEigenstateGivesPlusWithCertainty) {
  Rng rng = make_rng(3);
  const auto s = superposition_register(4, 3, +1);  // |+>|00>
  EXPECT_NEAR(outcome_probabilities(s, plus_minus_basis(0))[0], 1.0, kAlgebraTolerance);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(measure(s, plus_minus_basis(0), rng).label, "+");
}

TEST(Measure, BornStatisticsForEqualSuperposition) {
  Rng rng = make_rng(5);
  const auto s = superposition_register(6, 3, +1);
  stats::Proportion zero;
  for (int i = 0; i < 100000; ++i) {
    const auto o = measure(s, ComputationalBasis{}, rng).outcome;
    ASSERT_TRUE(o == 0 || o == 6);
    zero.add(o == 0);
  }
  EXPECT_TRUE(zero.within_sigmas(0.5)) << zero.mean();
}

TEST(Measure, PhiOneBasisOnZeroMatchesSquaredOverlap) {
  Rng rng = make_rng(8);
  const double theta = std::numbers::pi / 4.0;
  const auto basis = phi_basis(theta, PhiBasis::kPhi1, 0);
  const double expected = std::pow(std::cos(std::numbers::pi / 8.0), 2);
  const auto zero = Statevector::basis(1, 0);
  EXPECT_NEAR(outcome_probabilities(zero, basis)[0], expected, kAlgebraTolerance);
  stats::Proportion phi1;
  for (int i = 0; i < 100000; ++i) phi1.add(measure(zero, basis, rng).outcome == 0);
  EXPECT_TRUE(phi1.within_sigmas(expected)) << phi1.mean();
}

TEST(MeasureProperty, PairBasisFrequenciesFollowBornRule) {
  Rng rng = make_rng(13);
  for (int c = 0; c < 5; ++c) {
    const std::size_t m = gen::qubits(rng, 2, 5);
    const std::size_t j = gen::element_index(rng, m);
    const auto s = gen::pair_state(rng, m, j);
    const auto probs = outcome_probabilities(s, PairBasis{j});
    stats::Proportion plus;
    for (int i = 0; i < 100000; ++i) {
      const auto o = measure(s, PairBasis{j}, rng).outcome;
      ASSERT_LT(o, 2u);
      plus.add(o == 0);
    }
    EXPECT_TRUE(plus.within_sigmas(probs[0])) << plus.mean() << " vs " << probs[0];
  }
}

TEST(MeasureProperty, CollapsedStateRepeatsOutcome) {
  Rng rng = make_rng(21);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t m = gen::qubits(rng, 1, 4);
    const auto s = gen::dense_state(rng, m);
    const auto first = measure(s, ComputationalBasis{}, rng);
    ASSERT_EQ(measure(first.state, ComputationalBasis{}, rng).outcome, first.outcome);
  }
}

TEST(Helstrom, ClosedFormAtReferenceAngles) {
  EXPECT_NEAR(helstrom_guess_probability(0.0), 0.5, kAlgebraTolerance);
  EXPECT_NEAR(helstrom_guess_probability(std::numbers::pi / 4.0), 0.8535533905932737,
              kAlgebraTolerance);
  EXPECT_NEAR(helstrom_guess_probability(std::numbers::pi / 2.0), 1.0, kAlgebraTolerance);
  EXPECT_THROW(helstrom_guess_probability(-0.1), std::domain_error);
}

TEST(Helstrom, AgreesWithTraceDistanceOfThePhiStates) {
  for (double theta = 0.0; theta <= std::numbers::pi / 2.0; theta += 0.05) {
    const auto a = phi_state(theta, PhiBasis::kPhi0);
    const auto b = phi_state(theta, PhiBasis::kPhi1);
    const Amplitude overlap = std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1];
    const double trace_distance = std::sqrt(1.0 - std::norm(overlap));
    EXPECT_NEAR(helstrom_guess_probability(theta), 0.5 * (1.0 + trace_distance),
                kAlgebraTolerance);
  }
}

TEST(Helstrom, SimulatedOptimalMeasurementReachesTheBound) {
  Rng rng = make_rng(99);
  const double theta = std::numbers::pi / 4.0;
  stats::Proportion correct;
  for (int i = 0; i < 100000; ++i) {
    const bool one = bernoulli(rng, 0.5);
    const auto amps = phi_state(theta, one ? PhiBasis::kPhi1 : PhiBasis::kPhi0);
    const Statevector s(1, {amps[0], amps[1]});
    correct.add(measure(s, helstrom_basis(0), rng).outcome == (one ? 1u : 0u));
  }
  EXPECT_TRUE(correct.within_sigmas(helstrom_guess_probability(theta))) << correct.mean();
}

}  // namespace
}  // namespace qpsi
