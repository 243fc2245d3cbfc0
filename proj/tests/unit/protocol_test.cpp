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

#include "qpsi/protocol.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "generators.hpp"
#include "qpsi/stats.hpp"
#include "qpsi/transcript.hpp"

namespace qpsi {
namespace {

PartyInput input(std::vector<Element> e, std::size_t N) { return PartyInput::honest(std::move(e), N); }

ProtocolParams params_with_l(std::size_t l) {
  ProtocolParams p;
  p.l = l;
  return p;
}

// Brute-force oracle: every candidate in Z_N^* tested against both lists.
ElementSet brute_intersection(const PartyInput& x, const PartyInput& y) {
  ElementSet out;
  for (Element e = 1; e < x.modulus; ++e) {
    bool in_x = false, in_y = false;
    for (Element a : x.elements) in_x = in_x || a == e;
    for (Element b : y.elements) in_y = in_y || b == e;
    if (in_x && in_y) out.insert(e);
  }
  return out;
}

RegisterBatch batch_of(std::size_t m, std::vector<SlotRecord> records) {
  RegisterBatch b;
  b.num_qubits = m;
  for (std::size_t w = 0; w < records.size(); ++w) {
    const auto& r = records[w];
    b.registers.push_back(r.role == SlotRole::kCheck ? check_state(r.check, m)
                                                     : superposition_register(r.element, m, +1));
    b.wire_positions.push_back(w);
  }
  b.records = std::move(records);
  return b;
}

// --- database and masking -------------------------------------------------

TEST(Database, MembershipIndicator) {
  EXPECT_EQ(build_database(input({2, 5}, 8)), BitTable({0, 0, 1, 0, 0, 1, 0, 0}));
  EXPECT_EQ(build_database(input({}, 8)), BitTable::zeros(8));
  EXPECT_THROW(build_database(PartyInput{{0, 3}, 8, 2}), std::invalid_argument);
}

TEST(Mask, XorWithKeyBitExceptAtZero) {
  const BitTable p({0, 0, 1, 0});
  EXPECT_EQ(mask_database(p, 0), p);
  EXPECT_EQ(mask_database(p, 1), BitTable({0, 1, 0, 1}));
  Rng rng = make_rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto t = gen::bit_table(rng, 32);
    const auto r = static_cast<std::uint8_t>(i & 1);
    ASSERT_EQ(mask_database(mask_database(t, r), r), t);
  }
}

TEST(RegisterQubits, CeilLogOfModulus) {
  EXPECT_EQ(register_qubits(16), 4u);
  EXPECT_EQ(register_qubits(17), 5u);
  EXPECT_EQ(register_qubits(64), 6u);
  EXPECT_THROW(register_qubits(1), std::invalid_argument);
}

// --- batch preparation ----------------------------------------------------

TEST(PrepareBatch, HonestBatchHasOneCheckPerElement) {
  Rng rng = make_rng(2);
  const auto x = input({3, 5, 7}, 16);
  const auto b = prepare_batch(x, rng);
  EXPECT_EQ(b.size(), 6u);
  EXPECT_EQ(b.count(SlotRole::kActual), 3u);
  EXPECT_EQ(b.count(SlotRole::kCheck), 3u);
  for (std::size_t w = 0; w < b.size(); ++w) {
    const auto& r = b.records[w];
    const auto want = r.role == SlotRole::kCheck ? check_state(r.check, 4)
                                                 : superposition_register(r.element, 4, +1);
    EXPECT_TRUE(approx_equal(b.registers[w], want, 0.0));
  }
  // Prepared slot i (actuals first) travels at wire_positions[i].
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(b.records[b.wire_positions[i]].element, x.elements[i]);
  }
}

TEST(PrepareBatch, CheckStatesLiveOnTheTopBit) {
  EXPECT_TRUE(approx_equal(check_state(CheckKind::kZero, 4), Statevector::basis(4, 0), 0.0));
  EXPECT_TRUE(approx_equal(check_state(CheckKind::kOne, 4), Statevector::basis(4, 8), 0.0));
  EXPECT_TRUE(approx_equal(check_state(CheckKind::kMinus, 4), superposition_register(8, 4, -1),
                           0.0));
}

TEST(PrepareBatch, ExtraElementsTripleTheBatch) {
  Rng rng = make_rng(3);
  const auto b = prepare_batch(input({3, 5, 7}, 16), rng, alice::ExtraElements{3});
  EXPECT_EQ(b.size(), 9u);
  EXPECT_EQ(b.count(SlotRole::kFake), 3u);
  for (const auto& r : b.records) {
    if (r.role == SlotRole::kFake) {
      EXPECT_TRUE(r.element != 3 && r.element != 5 && r.element != 7);
    }
  }
}

TEST(PrepareBatch, CheckKindsAreUniform) {
  Rng rng = make_rng(4);
  std::array<std::uint64_t, 4> counts{};
  std::uint64_t total = 0;
  for (int i = 0; i < 5000; ++i) {
    for (const auto& r : prepare_batch(input({1, 2, 3, 4}, 16), rng).records) {
      if (r.role == SlotRole::kCheck) {
        ++counts[static_cast<int>(r.check)];
        ++total;
      }
    }
  }
  for (auto c : counts) EXPECT_TRUE((stats::Proportion{c, total}.within_sigmas(0.25)));
}

// --- oracle step ----------------------------------------------------------

TEST(OracleStep, ActualRegisterPicksUpTheMaskedBit) {
  Rng rng = make_rng(5);
  std::vector<std::uint8_t> q(16, 0);
  q[5] = 1;
  const std::vector<BitTable> tables{BitTable::zeros(16), BitTable(q)};
  const std::vector<Statevector> regs{Statevector::basis(4, 0), superposition_register(5, 4, +1)};
  const auto out = bob_receive_and_oracle(regs, tables, 1, rng);
  ASSERT_FALSE(out.aborted);
  EXPECT_TRUE(approx_equal(out.registers[1], superposition_register(5, 4, -1), kAlgebraTolerance));
  EXPECT_TRUE(approx_equal(out.registers[0], regs[0], 0.0));
}

TEST(OracleStep, MoreThanTwiceTheDeclaredSizeAborts) {
  Rng rng = make_rng(5);
  std::vector<Statevector> regs(7, Statevector::basis(4, 0));
  std::vector<BitTable> tables(7, BitTable::zeros(16));
  EXPECT_TRUE(bob_receive_and_oracle(regs, tables, 3, rng).aborted);
  regs.pop_back();
  EXPECT_FALSE(bob_receive_and_oracle(regs, tables, 3, rng).aborted);
}

TEST(OracleStep, ZeroCheckUnchangedUnderAnyHonestOracle) {
  Rng rng = make_rng(6);
  const auto zero = check_state(CheckKind::kZero, 5);
  for (int i = 0; i < 100; ++i) {
    const auto out = bob_receive_and_oracle({zero}, {gen::bit_table(rng, 32)}, 1, rng);
    ASSERT_TRUE(approx_equal(out.registers[0], zero, 0.0));
  }
}

// --- check phase and extraction -------------------------------------------

TEST(CheckPhase, HonestRunsNeverFlagged) {
  Rng rng = make_rng(7);
  for (int i = 0; i < 2000; ++i) {
    const auto x = input({1, 4, 9}, 16);
    const auto batch = prepare_batch(x, rng);
    std::vector<BitTable> tables;
    for (std::size_t t = 0; t < batch.size(); ++t) tables.push_back(gen::bit_table(rng, 16));
    const auto out = bob_receive_and_oracle(batch.registers, tables, 3, rng);
    const auto rep = alice_check_phase(out.registers, batch, rng);
    ASSERT_TRUE(rep.ok);
    ASSERT_EQ(rep.pm_corrupt, 0u);
  }
}

TEST(CheckPhase, PairBasisResendOnZeroCheckMismatchesHalfTheTime) {
  Rng rng = make_rng(8);
  const auto batch = batch_of(4, {{SlotRole::kCheck, 0, CheckKind::kZero}});
  const ChannelAttack attack{bob::ResendBasis::kPlusMinus, std::nullopt};
  stats::Proportion caught;
  for (int i = 0; i < 20000; ++i) {
    const auto out = bob_receive_and_oracle(batch.registers, {BitTable::zeros(16)}, 1, rng, attack);
    caught.add(!alice_check_phase(out.registers, batch, rng).ok);
  }
  EXPECT_TRUE(caught.within_sigmas(0.5)) << caught.mean();
}

TEST(Extraction, ReadsTheOracleBit) {
  Rng rng = make_rng(9);
  const auto batch = batch_of(4, {{SlotRole::kActual, 5, CheckKind::kZero}});
  for (std::uint8_t bit : {0, 1}) {
    std::vector<std::uint8_t> q(16, 0);
    q[5] = bit;
    for (int i = 0; i < 50; ++i) {
      const auto out = bob_receive_and_oracle(batch.registers, {BitTable(q)}, 1, rng);
      const auto ex = alice_extract(out.registers, batch, rng);
      ASSERT_EQ(ex.size(), 1u);
      ASSERT_EQ(ex[0].q, bit);
      ASSERT_EQ(ex[0].t, 1u);
      ASSERT_FALSE(ex[0].corrupt);
    }
  }
}

TEST(Extraction, ExhaustiveIdentityForSmallModuli) {
  Rng rng = make_rng(10);
  for (std::size_t N = 3; N <= 32; ++N) {
    const std::size_t m = register_qubits(N);
    for (Element j = 1; j < N; ++j) {
      const auto batch = batch_of(m, {{SlotRole::kActual, j, CheckKind::kZero}});
      for (std::uint8_t bit : {0, 1}) {
        std::vector<std::uint8_t> q(N, 0);
        q[j] = bit;
        const auto out = bob_receive_and_oracle(batch.registers, {BitTable(q)}, 1, rng);
        ASSERT_EQ(alice_extract(out.registers, batch, rng)[0].q, bit) << "N=" << N << " j=" << j;
      }
    }
  }
}

TEST(Extraction, CorruptSupportIsFlagged) {
  Rng rng = make_rng(11);
  const auto batch = batch_of(3, {{SlotRole::kActual, 3, CheckKind::kZero}});
  const std::vector<Statevector> returned{superposition_register(5, 3, +1)};
  const auto ex = alice_extract(returned, batch, rng);
  EXPECT_TRUE(ex[0].corrupt);
}

// --- classical rounds -----------------------------------------------------

KeyMaterial fixed_key(std::vector<std::uint8_t> bits, std::map<std::size_t, std::uint8_t> known) {
  KeyMaterial k;
  k.length = bits.size();
  k.bob_bits = std::move(bits);
  k.alice_known = std::move(known);
  return k;
}

TEST(Declare, UnmasksWithBobsKey) {
  Rng rng = make_rng(12);
  const auto key = fixed_key({1, 0, 1}, {});
  EXPECT_EQ(bob_declare({{1, 1}}, key, rng), (std::vector<std::uint8_t>{0}));
  EXPECT_EQ(bob_declare({{2, 1}, {3, 0}}, key, rng), (std::vector<std::uint8_t>{1, 1}));
  EXPECT_THROW(bob_declare({{4, 0}}, key, rng), std::invalid_argument);
}

TEST(Declare, WrongPjAllDeclaresEveryElement) {
  Rng rng = make_rng(13);
  const auto key = fixed_key({0, 1, 0, 1}, {});
  const std::vector<Disclosure> pairs{{1, 0}, {2, 1}, {3, 1}, {4, 0}};
  EXPECT_EQ(bob_declare(pairs, key, rng, bob::WrongPj{1.0}),
            (std::vector<std::uint8_t>{1, 1, 1, 1}));
}

TEST(Verify, HonestPassesAndKnownLieFails) {
  const auto key = fixed_key({0, 1, 0}, {{0, 0}, {2, 0}});
  const std::vector<Disclosure> pairs{{1, 1}, {2, 1}, {3, 0}};
  auto rep = alice_verify_declarations({1, 0, 0}, pairs, key);
  EXPECT_TRUE(rep.ok);
  EXPECT_EQ(rep.checked, 2u);
  EXPECT_FALSE(alice_verify_declarations({1, 0, 1}, pairs, key).ok);
  // A lie where Alice holds no key bit goes unnoticed.
  EXPECT_TRUE(alice_verify_declarations({1, 1, 0}, pairs, key).ok);
}

TEST(Announce, HonestAnnouncesDeclaredElements) {
  Rng rng = make_rng(14);
  const auto x = input({5, 3, 7}, 16);
  const auto a = alice_announce({1, 0, 1}, {5, 3, 7}, x, rng);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].element, 5u);
  EXPECT_EQ(a[1].element, 7u);
  EXPECT_FALSE(a[0].substituted || a[1].substituted);
}

TEST(Announce, SubstituteLandsOutsideYWithClosedFormProbability) {
  Rng rng = make_rng(15);
  const auto x = input({1, 2, 3, 4}, 32);
  const auto y = input({3, 4, 20, 21}, 32);  // u = 2, C2 = {20, 21}
  stats::Proportion in_c1;
  for (int i = 0; i < 20000; ++i) {
    const auto a = alice_announce({1}, {3}, x, rng, alice::WrongAnnounce{1.0});
    ASSERT_TRUE(a[0].substituted);
    ASSERT_FALSE(x.contains(a[0].element));
    in_c1.add(!y.contains(a[0].element));
  }
  EXPECT_TRUE(in_c1.within_sigmas(25.0 / 27.0)) << in_c1.mean();
}

TEST(Announce, SubstitutesAreDistinct) {
  Rng rng = make_rng(16);
  const auto x = input({1, 2, 3, 4}, 8);
  for (int i = 0; i < 500; ++i) {
    const auto a = alice_announce({1, 1, 1}, {1, 2, 3}, x, rng, 1.0);
    ElementSet seen;
    for (const auto& e : a) ASSERT_TRUE(seen.insert(e.element).second);
  }
}

TEST(Membership, BobChecksEveryAnnouncement) {
  const auto y = input({5, 7, 9}, 32);
  EXPECT_TRUE(bob_verify_membership({5, 7}, y).ok);
  EXPECT_FALSE(bob_verify_membership({5, 20}, y).ok);
  const auto wrong = bob_verify_membership({5, 9}, y);  // 9 in C2 when X = {3,5,7}
  EXPECT_TRUE(wrong.ok);
  EXPECT_EQ(wrong.accepted, (ElementSet{5, 9}));
}

// --- full runs ------------------------------------------------------------

TEST(RunProtocol, WorkedExample) {
  Rng rng = make_rng(17);
  const auto run = run_protocol(input({3, 5, 7}, 32), input({5, 7, 9}, 32), params_with_l(6),
                                StrategyProfile::suggested(), rng);
  ASSERT_FALSE(run.transcript.aborted());
  EXPECT_EQ(run.outcome.f_a, (ElementSet{5, 7}));
  EXPECT_EQ(run.outcome.f_b, (ElementSet{5, 7}));
}

TEST(RunProtocol, DisjointSetsAnnounceNothing) {
  Rng rng = make_rng(18);
  const auto run = run_protocol(input({1, 2}, 16), input({3, 4}, 16), params_with_l(4),
                                StrategyProfile::suggested(), rng);
  ASSERT_FALSE(run.transcript.aborted());
  EXPECT_EQ(run.outcome.f_a, ElementSet{});
  EXPECT_EQ(run.outcome.f_b, ElementSet{});
  EXPECT_EQ(run.transcript.find("announce")->payload.at("elements"), "0");
}

TEST(RunProtocol, CountersForTheReferenceParameters) {
  Rng rng = make_rng(19);
  const auto run = run_protocol(input({1, 2, 3, 4}, 16), input({3, 4, 5, 6}, 16),
                                params_with_l(16), StrategyProfile::suggested(), rng);
  ASSERT_FALSE(run.transcript.aborted());
  EXPECT_EQ(run.transcript.qubits_sent(), 48u);
  EXPECT_EQ(run.transcript.classical_bits_sent(), 32u);
  const auto cost = honest_communication_cost(4, 16, 2, 16);
  EXPECT_EQ(cost.qubit_units, 48u);
  EXPECT_EQ(cost.classical_bits, 32u);
}

TEST(RunProtocol, RejectsShortKeys) {
  Rng rng = make_rng(20);
  EXPECT_THROW(run_protocol(input({1, 2, 3}, 16), input({3}, 16), params_with_l(5),
                            StrategyProfile::suggested(), rng),
               std::invalid_argument);
}

TEST(RunProtocolProperty, HonestCompletenessOverRandomInstances) {
  Rng rng = make_rng(21);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const GameParams gp = gen::honest_params(rng);
    const Instance inst = sample_instance(gp, rng);
    const auto run = run_protocol(inst.x, inst.y, gp.protocol(), StrategyProfile::suggested(),
                                  rng, i);
    const ElementSet truth = brute_intersection(inst.x, inst.y);
    ASSERT_FALSE(run.transcript.aborted()) << run.transcript.abort_info()->reason;
    ASSERT_EQ(run.outcome.f_a, truth);
    ASSERT_EQ(run.outcome.f_b, truth);
    ASSERT_EQ(run.diagnostics.extraction_errors, 0u);
    ASSERT_TRUE(run.diagnostics.checks.ok);
  }
}

TEST(RunProtocolProperty, CountersMatchClosedFormOnAGrid) {
  std::uint64_t id = 0;
  for (std::size_t N : {16, 17, 32, 64, 100}) {
    for (std::size_t n : {1, 2, 4, 6}) {
      if (N <= 2 * n) continue;
      for (std::size_t l : {2 * n, 2 * n + 1, std::size_t{16}, std::size_t{33}}) {
        if (l < 2 * n) continue;
        for (std::size_t u = 0; u <= n; u += 2) {
          GameParams gp;
          gp.N = N;
          gp.n = gp.m = n;
          gp.u = u;
          gp.l = l;
          Rng rng = make_rng(22, id++);
          const Instance inst = sample_instance(gp, rng);
          const auto run = run_protocol(inst.x, inst.y, gp.protocol(),
                                        StrategyProfile::suggested(), rng);
          ASSERT_FALSE(run.transcript.aborted());
          const auto want = honest_communication_cost(n, l, u, N);
          ASSERT_EQ(run.transcript.qubits_sent(), want.qubit_units) << N << " " << n << " " << l;
          ASSERT_EQ(run.transcript.classical_bits_sent(), want.classical_bits)
              << N << " " << n << " " << l << " " << u;
        }
      }
    }
  }
}

TEST(RunProtocolProperty, HonestHooksAndRuntimeHooksAgree) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng gen_rng = make_rng(23, i);
    const GameParams gp = gen::honest_params(gen_rng);
    const Instance inst = sample_instance(gp, gen_rng);
    Rng a = make_rng(24, i), b = make_rng(24, i);
    const auto r1 = run_protocol(inst.x, inst.y, gp.protocol(), StrategyProfile::suggested(), a, i);
    const auto r2 = run_protocol_with(inst.x, inst.y, gp.protocol(), HonestHooks{}, b, i);
    ASSERT_EQ(to_jsonl(r1.transcript), to_jsonl(r2.transcript));
  }
}

// --- transcripts ----------------------------------------------------------

TEST(Transcript, NothingFollowsAnAbort) {
  Transcript t(3);
  t.record(2, Actor::kBob, "database");
  t.abort(10, Actor::kBob, "too many registers");
  EXPECT_THROW(t.record(11, Actor::kBob, "return_registers"), std::logic_error);
  EXPECT_THROW(t.abort(11, Actor::kBob, "again"), std::logic_error);
  EXPECT_EQ(t.abort_info()->step, 10);
}

TEST(TranscriptProperty, AbortIsAlwaysLastAndJsonlRoundTrips) {
  const std::vector<StrategyProfile> profiles{
      StrategyProfile::suggested(),
      {alice::ExtraElements{2}, bob::Honest{}},
      {alice::Honest{}, bob::WrongPj{1.0}},
      {alice::Honest{}, bob::MeasureResend{bob::ResendBasis::kComputational}},
      {alice::WrongAnnounce{1.0}, bob::Honest{}},
  };
  std::string stream;
  std::vector<Transcript> originals;
  std::uint64_t id = 0;
  for (const auto& prof : profiles) {
    for (int i = 0; i < 40; ++i, ++id) {
      Rng rng = make_rng(25, id);
      const GameParams gp = gen::honest_params(rng);
      const Instance inst = sample_instance(gp, rng);
      const auto run = run_protocol(inst.x, inst.y, gp.protocol(), prof, rng, id);
      const auto& ev = run.transcript.events();
      for (std::size_t k = 0; k + 1 < ev.size(); ++k) ASSERT_NE(ev[k].kind, kAbortKind);
      ASSERT_EQ(run.transcript.aborted(), ev.back().kind == kAbortKind);
      stream += to_jsonl(run.transcript);
      originals.push_back(run.transcript);
    }
  }
  EXPECT_EQ(parse_transcripts_jsonl(stream), originals);
}

TEST(Transcript, ParserRejectsEventsAfterAbortAndShrinkingCounters) {
  TranscriptEvent a{1, 10, Actor::kBob, "abort", {{"reason", "x"}}, 5, 0};
  TranscriptEvent b{1, 11, Actor::kBob, "return_registers", {}, 5, 0};
  EXPECT_THROW(Transcript::from_events({a, b}), std::invalid_argument);
  TranscriptEvent c{1, 3, Actor::kChannel, "keygen", {}, 8, 0};
  TranscriptEvent d{1, 4, Actor::kBob, "mask", {}, 4, 0};
  EXPECT_THROW(Transcript::from_events({c, d}), std::invalid_argument);
  EXPECT_THROW(parse_transcripts_jsonl("{\"run_id\":1}\n"), std::invalid_argument);
}

// --- membership replay ----------------------------------------------------

TEST(MembershipReplay, HonestBitMatchesMembership) {
  const auto y = input({3, 9, 12}, 16);
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = make_rng(26, s);
    const Element k = static_cast<Element>(1 + s % 15);
    const auto run = run_membership_qosmdp(k, y, 8, rng);
    ASSERT_EQ(run.member, y.contains(k) ? 1 : 0) << k;
    ASSERT_EQ(run.transcript.qubits_sent(), 16u);
    ASSERT_EQ(run.transcript.classical_bits_sent(), 4u);
  }
}

TEST(MembershipReplay, HonestDecoysFlipHalfTheTime) {
  const auto y = input({3, 9, 12}, 16);
  stats::Proportion flips;
  std::size_t corrupt = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    Rng rng = make_rng(27, s);
    const auto run = run_membership_qosmdp(9, y, 10, rng);
    flips += stats::Proportion{run.decoys.flipped, run.decoys.decoys};
    corrupt += run.decoys.corrupt;
  }
  EXPECT_EQ(corrupt, 0u);
  EXPECT_TRUE(flips.within_sigmas(0.5)) << flips.mean();
}

TEST(MembershipReplay, MeasureResendLeavesDecoyStatisticsUnchanged) {
  const auto y = input({3, 9, 12}, 16);
  DecoyStats honest, attacked;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    Rng a = make_rng(28, s), b = make_rng(29, s);
    honest += run_membership_qosmdp(9, y, 10, a, false).decoys;
    attacked += run_membership_qosmdp(9, y, 10, b, true).decoys;
  }
  const auto chi = stats::chi_squared_homogeneity(honest.histogram(), attacked.histogram());
  EXPECT_GT(chi.p_value, stats::four_sigma_p_value()) << chi.statistic;
}

TEST(MembershipReplay, RejectsBadArguments) {
  Rng rng = make_rng(30);
  const auto y = input({3}, 16);
  EXPECT_THROW(run_membership_qosmdp(0, y, 4, rng), std::invalid_argument);
  EXPECT_THROW(run_membership_qosmdp(3, y, 1, rng), std::invalid_argument);
}

}  // namespace
}  // namespace qpsi
