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
 * The set-intersection dialogue between Alice (holding X) and Bob (holding Y),
 * plus a replay of the single-element membership protocol it builds on.
 *
 * Each stage is a free function so tests can drive it in isolation;
 * run_protocol_with() chains them and writes the transcript. Step numbers in
 * transcripts follow the 22-step numbering of the dialogue:
 *
 *    2  Bob builds p             13  Alice checks the check registers
 *    3  key generation           16  Alice extracts q_t per actual register
 *    4  Bob masks p into q_t     18  Alice discloses (t, q_t)
 *    9  Alice prepares 2n regs   19  Bob declares p = q_t xor r_t
 *   10  registers sent to Bob    20  Alice verifies where she knows r_t
 *   11  oracle applied, returned 21  Alice announces elements declared 1
 *                                22  Bob checks the announced elements
 *
 * Wire position t (1-based) selects the oracle table q_t, so l >= 2n.
 * Qubit counters are in register units: one unit per M-qubit register or
 * per entangled pair sent.
 */
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpsi/keygen.hpp"
#include "qpsi/rng.hpp"
#include "qpsi/statevec.hpp"
#include "qpsi/strategies.hpp"
#include "qpsi/transcript.hpp"

namespace qpsi {

using Element = std::uint32_t;
using ElementSet = std::set<Element>;

/// Smallest b with 2^b >= x (0 for x = 1).
inline std::size_t ceil_log2(std::size_t x) {
  if (x == 0) throw std::invalid_argument("ceil_log2 of zero");
  std::size_t b = 0;
  while ((std::size_t{1} << b) < x) ++b;
  return b;
}

/// Register width M = ceil(log2 N) for elements of Z_N.
inline std::size_t register_qubits(std::size_t modulus) {
  if (modulus < 2) throw std::invalid_argument("modulus must be at least 2");
  const std::size_t m = ceil_log2(modulus);
  if (m > kMaxQubits) throw std::invalid_argument("modulus needs more than 12 qubits");
  return m;
}

struct PartyInput {
  std::vector<Element> elements;
  std::size_t modulus = 0;
  std::size_t declared_cardinality = 0;

  static PartyInput honest(std::vector<Element> elements, std::size_t modulus) {
    PartyInput p{std::move(elements), modulus, 0};
    p.declared_cardinality = p.elements.size();
    p.validate();
    return p;
  }

  void validate() const {
    register_qubits(modulus);
    std::set<Element> seen;
    for (Element e : elements) {
      if (e == 0 || e >= modulus) {
        throw std::invalid_argument("element " + std::to_string(e) + " outside [1, N-1]");
      }
      if (!seen.insert(e).second) {
        throw std::invalid_argument("duplicate element " + std::to_string(e));
      }
    }
  }

  std::size_t size() const { return elements.size(); }
  bool contains(Element e) const {
    return std::find(elements.begin(), elements.end(), e) != elements.end();
  }
  ElementSet as_set() const { return {elements.begin(), elements.end()}; }
};

inline ElementSet intersect(const PartyInput& x, const PartyInput& y) {
  ElementSet out;
  for (Element e : x.elements) {
    if (y.contains(e)) out.insert(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bob's database.

/// p(j) = 1 iff j is in Y.
inline BitTable build_database(const PartyInput& y) {
  y.validate();
  std::vector<std::uint8_t> p(y.modulus, 0);
  for (Element e : y.elements) p[e] = 1;
  return BitTable(std::move(p));
}

/// q_t(j) = p(j) xor r_t, with q_t(0) kept at 0.
inline BitTable mask_database(const BitTable& p, std::uint8_t r) {
  if (r > 1) throw std::invalid_argument("mask must be a bit");
  std::vector<std::uint8_t> q(p.entries().begin(), p.entries().end());
  for (std::size_t j = 1; j < q.size(); ++j) q[j] ^= r;
  return BitTable(std::move(q));
}

// ---------------------------------------------------------------------------
// Alice's register batch.

enum class SlotRole { kActual, kCheck, kFake };
enum class CheckKind { kZero, kOne, kPlus, kMinus };

inline std::string_view to_string(SlotRole r) {
  switch (r) {
    case SlotRole::kActual:
      return "actual";
    case SlotRole::kCheck:
      return "check";
    case SlotRole::kFake:
      return "fake";
  }
  return "?";
}

inline std::string_view to_string(CheckKind k) {
  switch (k) {
    case CheckKind::kZero:
      return "zero";
    case CheckKind::kOne:
      return "one";
    case CheckKind::kPlus:
      return "plus";
    case CheckKind::kMinus:
      return "minus";
  }
  return "?";
}

/// Index 2^(M-1), i.e. bit pattern 10...0, used by the one/plus/minus checks.
inline std::size_t check_index(std::size_t num_qubits) {
  return std::size_t{1} << (num_qubits - 1);
}

inline Statevector check_state(CheckKind kind, std::size_t num_qubits) {
  switch (kind) {
    case CheckKind::kZero:
      return Statevector::basis(num_qubits, 0);
    case CheckKind::kOne:
      return Statevector::basis(num_qubits, check_index(num_qubits));
    case CheckKind::kPlus:
      return superposition_register(check_index(num_qubits), num_qubits, +1);
    case CheckKind::kMinus:
      return superposition_register(check_index(num_qubits), num_qubits, -1);
  }
  throw std::invalid_argument("unknown check kind");
}

struct SlotRecord {
  SlotRole role = SlotRole::kActual;
  Element element = 0;                  // actual and fake slots
  CheckKind check = CheckKind::kZero;  // check slots

  bool operator==(const SlotRecord&) const = default;
};

struct RegisterBatch {
  std::size_t num_qubits = 0;
  std::vector<Statevector> registers;  // in wire order
  std::vector<SlotRecord> records;     // Alice's private view, in wire order
  // Prepared slot i (actuals first, then checks, then extras) travels at
  // wire index wire_positions[i].
  std::vector<std::size_t> wire_positions;

  std::size_t size() const { return registers.size(); }
  std::size_t count(SlotRole role) const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [role](const SlotRecord& r) { return r.role == role; }));
  }
};

/// How far a batch departs from n actual + n check registers.
struct BatchPlan {
  std::size_t extra_fakes = 0;
  bool checks_as_fakes = false;
};

inline RegisterBatch prepare_batch(const PartyInput& x, Rng& rng, const BatchPlan& plan = {}) {
  x.validate();
  const std::size_t m = register_qubits(x.modulus);
  const std::size_t n = x.size();

  std::vector<SlotRecord> prepared;
  prepared.reserve(2 * n + plan.extra_fakes);
  for (Element e : x.elements) prepared.push_back({SlotRole::kActual, e, CheckKind::kZero});

  const std::size_t fakes = plan.extra_fakes + (plan.checks_as_fakes ? n : 0);
  std::vector<Element> fake_pool;
  if (fakes > 0) {
    std::vector<Element> outside;
    for (Element e = 1; e < x.modulus; ++e) {
      if (!x.contains(e)) outside.push_back(e);
    }
    if (outside.size() < fakes) throw std::invalid_argument("not enough elements for fakes");
    fake_pool = sample_without_replacement(std::move(outside), fakes, rng);
  }
  std::size_t next_fake = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (plan.checks_as_fakes) {
      prepared.push_back({SlotRole::kFake, fake_pool[next_fake++], CheckKind::kZero});
    } else {
      const auto kind = static_cast<CheckKind>(uniform_int<int>(rng, 0, 3));
      prepared.push_back({SlotRole::kCheck, 0, kind});
    }
  }
  for (std::size_t i = 0; i < plan.extra_fakes; ++i) {
    prepared.push_back({SlotRole::kFake, fake_pool[next_fake++], CheckKind::kZero});
  }

  const std::size_t total = prepared.size();
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  order = sample_without_replacement(std::move(order), total, rng);  // order[w] = slot at wire w

  RegisterBatch batch;
  batch.num_qubits = m;
  batch.wire_positions.assign(total, 0);
  batch.registers.reserve(total);
  batch.records.reserve(total);
  for (std::size_t w = 0; w < total; ++w) {
    const SlotRecord& rec = prepared[order[w]];
    batch.wire_positions[order[w]] = w;
    batch.records.push_back(rec);
    batch.registers.push_back(rec.role == SlotRole::kCheck
                                  ? check_state(rec.check, m)
                                  : superposition_register(rec.element, m, +1));
  }
  return batch;
}

template <typename Hooks>
BatchPlan batch_plan(const Hooks& hooks) {
  return {hooks.extra_elements(), hooks.checks_replaced_by_fakes()};
}

inline RegisterBatch prepare_batch(const PartyInput& x, Rng& rng, const AliceStrategy& strategy) {
  return prepare_batch(x, rng, batch_plan(StrategyHooks({strategy, bob::Honest{}})));
}

// ---------------------------------------------------------------------------
// Bob's side of the quantum exchange.

struct ChannelAttack {
  std::optional<bob::ResendBasis> resend;
  std::optional<double> eta;
};

template <typename Hooks>
ChannelAttack channel_attack(const Hooks& hooks) {
  return {hooks.measure_resend(), hooks.entangle_eta()};
}

struct OracleResult {
  bool aborted = false;
  std::vector<Statevector> registers;
  std::vector<std::optional<std::size_t>> learned;  // measure-resend readouts
  std::vector<AncillaLabel> ancilla;                // entangle-measure labels
};

/// Steps 10-11: size check, optional channel attack, then O_t at wire t.
inline OracleResult bob_receive_and_oracle(const std::vector<Statevector>& registers,
                                           const std::vector<BitTable>& tables,
                                           std::size_t declared_cardinality, Rng& rng,
                                           const ChannelAttack& attack = {}) {
  OracleResult out;
  if (registers.size() > 2 * declared_cardinality) {
    out.aborted = true;
    return out;
  }
  if (tables.size() < registers.size()) {
    throw std::invalid_argument("fewer oracle tables than registers (need l >= 2n)");
  }
  out.registers.reserve(registers.size());
  for (std::size_t t = 0; t < registers.size(); ++t) {
    Statevector reg = registers[t];
    if (attack.resend) {
      const auto basis = resend_basis(*attack.resend, tables[t].modulus(), rng);
      ResendResult r = apply_measure_resend(reg, basis, rng);
      out.learned.push_back(r.learned);
      reg = std::move(r.state);
    }
    if (attack.eta) {
      EntangleResult r = apply_entangle_measure(reg, *attack.eta, rng);
      out.ancilla.push_back(r.label);
      reg = std::move(r.state);
    }
    out.registers.push_back(apply_oracle(reg, tables[t]));
  }
  return out;
}

inline OracleResult bob_receive_and_oracle(const std::vector<Statevector>& registers,
                                           const std::vector<BitTable>& tables,
                                           std::size_t declared_cardinality, Rng& rng,
                                           const BobStrategy& strategy) {
  return bob_receive_and_oracle(registers, tables, declared_cardinality, rng,
                                channel_attack(StrategyHooks({alice::Honest{}, strategy})));
}

// ---------------------------------------------------------------------------
// Alice's checks and extraction.

struct CheckReport {
  bool ok = true;
  std::size_t computational_checks = 0;
  std::size_t mismatches = 0;
  std::size_t pm_checks = 0;
  std::size_t pm_sign_flips = 0;  // recorded only; the oracle may flip signs
  std::size_t pm_corrupt = 0;
};

/// Steps 12-13. Zero/one checks are read in the computational basis and any
/// mismatch fails the phase; plus/minus checks are read in their pair basis
/// and only tallied.
inline CheckReport alice_check_phase(const std::vector<Statevector>& returned,
                                     const RegisterBatch& batch, Rng& rng) {
  if (returned.size() != batch.records.size()) {
    throw std::invalid_argument("returned register count differs from Alice's records");
  }
  CheckReport rep;
  const std::size_t top = check_index(batch.num_qubits);
  for (std::size_t w = 0; w < returned.size(); ++w) {
    const SlotRecord& rec = batch.records[w];
    if (rec.role != SlotRole::kCheck) continue;
    if (rec.check == CheckKind::kZero || rec.check == CheckKind::kOne) {
      ++rep.computational_checks;
      const std::size_t expected = rec.check == CheckKind::kZero ? 0 : top;
      if (measure(returned[w], ComputationalBasis{}, rng).outcome != expected) ++rep.mismatches;
    } else {
      ++rep.pm_checks;
      const std::size_t got = measure(returned[w], PairBasis{top}, rng).outcome;
      const std::size_t sent = rec.check == CheckKind::kPlus ? 0 : 1;
      if (got >= 2) {
        ++rep.pm_corrupt;
      } else if (got != sent) {
        ++rep.pm_sign_flips;
      }
    }
  }
  rep.ok = rep.mismatches == 0;
  return rep;
}

struct Extraction {
  std::size_t t = 0;  // 1-based wire position
  SlotRole role = SlotRole::kActual;
  Element element = 0;
  std::uint8_t q = 0;
  bool corrupt = false;  // support left span{|0>, |element>} before reduction
};

/// Steps 14-17 on every actual or fake register, in wire order.
inline std::vector<Extraction> alice_extract(const std::vector<Statevector>& returned,
                                             const RegisterBatch& batch, Rng& rng) {
  if (returned.size() != batch.records.size()) {
    throw std::invalid_argument("returned register count differs from Alice's records");
  }
  std::vector<Extraction> out;
  for (std::size_t w = 0; w < returned.size(); ++w) {
    const SlotRecord& rec = batch.records[w];
    if (rec.role == SlotRole::kCheck) continue;
    Extraction ex{w + 1, rec.role, rec.element, 0, false};
    Statevector reduced = returned[w];
    try {
      reduced = reduce_to_plus_minus(returned[w], rec.element);
    } catch (const CorruptRegister&) {
      ex.corrupt = true;
      reduced = apply_reduction_circuit(returned[w], rec.element);
    }
    ex.q = static_cast<std::uint8_t>(measure(reduced, plus_minus_basis(0), rng).outcome);
    out.push_back(ex);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classical rounds.

struct Disclosure {
  std::size_t t = 0;  // 1-based wire position
  std::uint8_t q = 0;

  bool operator==(const Disclosure&) const = default;
};

/// Step 19: p = q_t xor r_t. A lying Bob turns true zeros into ones with
/// probability `wrong_pj_rate`; `lied`, if given, marks those entries.
inline std::vector<std::uint8_t> bob_declare(const std::vector<Disclosure>& pairs,
                                             const KeyMaterial& key, Rng& rng,
                                             double wrong_pj_rate = 0.0,
                                             std::vector<bool>* lied = nullptr) {
  std::vector<std::uint8_t> declared;
  declared.reserve(pairs.size());
  if (lied) lied->assign(pairs.size(), false);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& d = pairs[i];
    if (d.t < 1 || d.t > key.bob_bits.size()) {
      throw std::invalid_argument("disclosed position outside [1, l]");
    }
    std::uint8_t p = static_cast<std::uint8_t>((d.q ^ key.bob_bits[d.t - 1]) & 1u);
    if (p == 0 && wrong_pj_rate > 0.0 && bernoulli(rng, wrong_pj_rate)) {
      p = 1;
      if (lied) (*lied)[i] = true;
    }
    declared.push_back(p);
  }
  return declared;
}

inline std::vector<std::uint8_t> bob_declare(const std::vector<Disclosure>& pairs,
                                             const KeyMaterial& key, Rng& rng,
                                             const BobStrategy& strategy) {
  return bob_declare(pairs, key, rng, StrategyHooks({alice::Honest{}, strategy}).wrong_pj_rate());
}

struct VerifyReport {
  bool ok = true;
  std::size_t checked = 0;
  std::size_t mismatches = 0;
};

/// Step 20: recompute p wherever Alice holds r_t.
inline VerifyReport alice_verify_declarations(const std::vector<std::uint8_t>& declared,
                                              const std::vector<Disclosure>& pairs,
                                              const KeyMaterial& key) {
  if (declared.size() != pairs.size()) throw std::invalid_argument("declaration count mismatch");
  VerifyReport rep;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto it = key.alice_known.find(pairs[i].t - 1);
    if (it == key.alice_known.end()) continue;
    ++rep.checked;
    if (((pairs[i].q ^ it->second) & 1u) != declared[i]) ++rep.mismatches;
  }
  rep.ok = rep.mismatches == 0;
  return rep;
}

struct Announcement {
  std::size_t index = 0;  // into the declaration list
  Element element = 0;
  bool substituted = false;
};

/// Step 21: the elements whose declaration is 1. A cheating Alice swaps each
/// with probability `wrong_announce_rate` for a distinct draw from Z_N^* \ X.
inline std::vector<Announcement> alice_announce(const std::vector<std::uint8_t>& declared,
                                                const std::vector<Element>& elements,
                                                const PartyInput& x, Rng& rng,
                                                double wrong_announce_rate = 0.0) {
  if (declared.size() != elements.size()) throw std::invalid_argument("declaration count mismatch");
  std::vector<Announcement> out;
  std::vector<Element> pool;
  for (std::size_t i = 0; i < declared.size(); ++i) {
    if (!declared[i]) continue;
    Announcement a{i, elements[i], false};
    if (wrong_announce_rate > 0.0 && bernoulli(rng, wrong_announce_rate)) {
      if (pool.empty()) {
        for (Element e = 1; e < x.modulus; ++e) {
          if (!x.contains(e)) pool.push_back(e);
        }
        for (const auto& prev : out) std::erase(pool, prev.element);
      }
      if (!pool.empty()) {
        const std::size_t k = uniform_int<std::size_t>(rng, 0, pool.size() - 1);
        a.element = pool[k];
        a.substituted = true;
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
      }
    }
    out.push_back(a);
  }
  return out;
}

inline std::vector<Announcement> alice_announce(const std::vector<std::uint8_t>& declared,
                                                const std::vector<Element>& elements,
                                                const PartyInput& x, Rng& rng,
                                                const AliceStrategy& strategy) {
  return alice_announce(declared, elements, x, rng,
                        StrategyHooks({strategy, bob::Honest{}}).wrong_announce_rate());
}

struct MembershipCheck {
  bool ok = true;
  ElementSet accepted;
  std::vector<Element> rejected;
};

/// Step 22.
inline MembershipCheck bob_verify_membership(const std::vector<Element>& announced,
                                             const PartyInput& y) {
  MembershipCheck out;
  for (Element e : announced) {
    if (y.contains(e)) {
      out.accepted.insert(e);
    } else {
      out.rejected.push_back(e);
    }
  }
  out.ok = out.rejected.empty();
  return out;
}

// ---------------------------------------------------------------------------
// Full run.

struct ProtocolParams {
  double theta = std::numbers::pi / 4.0;
  std::size_t l = 0;
  double noise = 0.0;
  double threshold = 0.05;
};

struct Outcome {
  std::optional<ElementSet> f_a;
  std::optional<ElementSet> f_b;

  bool operator==(const Outcome&) const = default;
};

struct RunDiagnostics {
  std::size_t key_known = 0;  // |alice_known|
  double key_error_rate = 0.0;
  CheckReport checks;
  std::size_t corrupt_registers = 0;
  std::size_t extraction_errors = 0;  // extracted q differs from p xor r
  std::size_t leaked_elements = 0;    // actual elements Bob read off the wire
  std::size_t entangle_flips = 0;     // E01 branches
  std::size_t wrong_qt_flips = 0;
  std::size_t declaration_lies = 0;
  std::size_t verified_positions = 0;
  std::size_t substitutions = 0;
  std::vector<Element> substitutes;  // elements swapped in at step 21
  bool deviation_triggered = false;
};

struct ProtocolRun {
  Transcript transcript;
  Outcome outcome;
  RunDiagnostics diagnostics;
};

namespace detail {

inline std::string str(std::size_t v) { return std::to_string(v); }

inline std::string join(const ElementSet& s) {
  std::string out;
  for (Element e : s) {
    if (!out.empty()) out += ',';
    out += std::to_string(e);
  }
  return out;
}

inline void check_run_preconditions(const PartyInput& x, const PartyInput& y,
                                    const ProtocolParams& params) {
  x.validate();
  y.validate();
  if (x.modulus != y.modulus) throw std::invalid_argument("parties disagree on N");
  if (x.modulus <= 2 * std::max(x.size(), y.size())) {
    throw std::invalid_argument("N must exceed 2*max(n, m)");
  }
  if (params.l < 2 * x.size() || params.l < 1) throw std::invalid_argument("l must be >= 2n");
}

}  // namespace detail

/// Runs the whole dialogue with deviations supplied by `hooks`
/// (StrategyHooks or HonestHooks).
template <typename Hooks>
ProtocolRun run_protocol_with(const PartyInput& x, const PartyInput& y,
                              const ProtocolParams& params, const Hooks& hooks, Rng& rng,
                              std::uint64_t run_id = 0) {
  detail::check_run_preconditions(x, y, params);
  using detail::str;
  ProtocolRun run{Transcript(run_id), {}, {}};
  Transcript& tr = run.transcript;
  RunDiagnostics& diag = run.diagnostics;
  const std::size_t n = x.size();
  const std::size_t m_bits = register_qubits(x.modulus);

  const BitTable p = build_database(y);
  tr.record(2, Actor::kBob, "database", {{"modulus", str(y.modulus)}});

  KeygenOptions kopts;
  kopts.abort_threshold = params.threshold;
  const KeyMaterial key = run_keygen(params.l, {params.theta, params.noise}, rng, kopts);
  diag.key_known = key.alice_known.size();
  diag.key_error_rate = key.error_rate;
  tr.record(3, Actor::kChannel, "keygen",
            {{"pairs", str(key.pairs)},
             {"known", str(key.alice_known.size())},
             {"error_rate", detail::format_number(key.error_rate)}},
            key.pairs);
  if (key.aborted) {
    tr.abort(3, Actor::kChannel, "key error rate above threshold");
    return run;
  }

  std::vector<BitTable> tables;
  tables.reserve(params.l);
  for (std::size_t t = 0; t < params.l; ++t) tables.push_back(mask_database(p, key.bob_bits[t]));
  tr.record(4, Actor::kBob, "mask", {{"tables", str(tables.size())}});

  const BatchPlan plan = batch_plan(hooks);
  if (plan.extra_fakes > 0 || plan.checks_as_fakes) diag.deviation_triggered = true;
  const RegisterBatch batch = prepare_batch(x, rng, plan);
  tr.record(9, Actor::kAlice, "prepare",
            {{"actual", str(batch.count(SlotRole::kActual))},
             {"check", str(batch.count(SlotRole::kCheck))},
             {"fake", str(batch.count(SlotRole::kFake))}});
  tr.record(10, Actor::kAlice, "send_registers",
            {{"registers", str(batch.size())}, {"physical_qubits", str(batch.size() * m_bits)}},
            batch.size());

  const ChannelAttack attack = channel_attack(hooks);
  if (attack.resend || attack.eta) diag.deviation_triggered = true;
  OracleResult oracle =
      bob_receive_and_oracle(batch.registers, tables, x.declared_cardinality, rng, attack);
  if (oracle.aborted) {
    tr.abort(10, Actor::kBob, "more than 2n registers received");
    return run;
  }
  for (std::size_t w = 0; w < oracle.learned.size(); ++w) {
    const auto& rec = batch.records[w];
    if (rec.role == SlotRole::kActual && oracle.learned[w] == rec.element) ++diag.leaked_elements;
  }
  for (auto label : oracle.ancilla) {
    if (label == AncillaLabel::kE01) ++diag.entangle_flips;
  }
  tr.record(11, Actor::kBob, "return_registers",
            {{"registers", str(oracle.registers.size())},
             {"physical_qubits", str(oracle.registers.size() * m_bits)}},
            oracle.registers.size());

  diag.checks = alice_check_phase(oracle.registers, batch, rng);
  if (!diag.checks.ok) {
    tr.abort(13, Actor::kAlice, "check register mismatch");
    return run;
  }
  tr.record(13, Actor::kAlice, "check_phase",
            {{"computational", str(diag.checks.computational_checks)},
             {"pm", str(diag.checks.pm_checks)},
             {"pm_sign_flips", str(diag.checks.pm_sign_flips)}});

  const std::vector<Extraction> extracted = alice_extract(oracle.registers, batch, rng);
  for (const auto& ex : extracted) {
    if (ex.corrupt) ++diag.corrupt_registers;
    if (ex.q != (p[ex.element] ^ key.bob_bits[ex.t - 1])) ++diag.extraction_errors;
  }
  tr.record(16, Actor::kAlice, "extract",
            {{"registers", str(extracted.size())}, {"corrupt", str(diag.corrupt_registers)}});

  // Step 18. A NoChecks Alice has only n disclosure slots to spend and uses
  // them on her fakes.
  const SlotRole disclosed_role = plan.checks_as_fakes ? SlotRole::kFake : SlotRole::kActual;
  std::vector<Disclosure> pairs;
  std::vector<Element> disclosed_elements;
  const double qt_rate = hooks.wrong_qt_rate();
  for (const auto& ex : extracted) {
    if (ex.role != disclosed_role) continue;
    if (disclosed_role == SlotRole::kFake && pairs.size() == n) break;
    std::uint8_t reported = ex.q;
    if (qt_rate > 0.0) {
      auto it = key.alice_known.find(ex.t - 1);
      if (it != key.alice_known.end() && ((ex.q ^ it->second) & 1u) == 1 &&
          bernoulli(rng, qt_rate)) {
        reported ^= 1u;
        ++diag.wrong_qt_flips;
        diag.deviation_triggered = true;
      }
    }
    pairs.push_back({ex.t, reported});
    disclosed_elements.push_back(ex.element);
  }
  tr.record(18, Actor::kAlice, "disclose", {{"pairs", str(pairs.size())}},
            0, pairs.size() * (ceil_log2(params.l) + 1));

  std::vector<bool> lied;
  const std::vector<std::uint8_t> declared =
      bob_declare(pairs, key, rng, hooks.wrong_pj_rate(), &lied);
  diag.declaration_lies = static_cast<std::size_t>(std::count(lied.begin(), lied.end(), true));
  if (diag.declaration_lies > 0) diag.deviation_triggered = true;
  tr.record(19, Actor::kBob, "declare",
            {{"ones", str(static_cast<std::size_t>(
                          std::count(declared.begin(), declared.end(), std::uint8_t{1})))}},
            0, declared.size());

  const VerifyReport verify = alice_verify_declarations(declared, pairs, key);
  diag.verified_positions = verify.checked;
  if (!verify.ok) {
    tr.abort(20, Actor::kAlice, "declaration contradicts known key bit");
    return run;
  }
  tr.record(20, Actor::kAlice, "verify", {{"checked", str(verify.checked)}});

  // Alice's result: her own p where she holds r_t, Bob's declaration
  // otherwise. Any actual element left undetermined leaves her with nothing.
  std::optional<ElementSet> f_a = ElementSet{};
  for (const auto& ex : extracted) {
    if (ex.role != SlotRole::kActual) continue;
    std::optional<std::uint8_t> bit;
    if (auto it = key.alice_known.find(ex.t - 1); it != key.alice_known.end()) {
      bit = static_cast<std::uint8_t>((ex.q ^ it->second) & 1u);
    } else {
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].t == ex.t) bit = declared[i];
      }
    }
    if (!bit) {
      f_a.reset();
      break;
    }
    if (*bit) f_a->insert(ex.element);
  }

  const std::vector<Announcement> announced =
      alice_announce(declared, disclosed_elements, x, rng, hooks.wrong_announce_rate());
  for (const auto& a : announced) {
    if (!a.substituted) continue;
    ++diag.substitutions;
    diag.substitutes.push_back(a.element);
  }
  if (diag.substitutions > 0) diag.deviation_triggered = true;
  tr.record(21, Actor::kAlice, "announce", {{"elements", str(announced.size())}}, 0,
            announced.size() * m_bits);

  // Step 22. Bob only vouches for positions where he told the truth; a lying
  // Bob quietly filters the rest against Y.
  std::vector<Element> vouched;
  ElementSet unvouched_hits;
  for (const auto& a : announced) {
    if (lied[a.index]) {
      if (y.contains(a.element)) unvouched_hits.insert(a.element);
    } else {
      vouched.push_back(a.element);
    }
  }
  MembershipCheck member = bob_verify_membership(vouched, y);
  if (!member.ok) {
    tr.abort(22, Actor::kBob, "announced element outside Y");
    return run;
  }
  ElementSet f_b = member.accepted;
  f_b.insert(unvouched_hits.begin(), unvouched_hits.end());
  tr.record(22, Actor::kBob, "membership_check", {{"accepted", str(f_b.size())}});

  run.outcome.f_a = std::move(f_a);
  run.outcome.f_b = std::move(f_b);
  return run;
}

inline ProtocolRun run_protocol(const PartyInput& x, const PartyInput& y,
                                const ProtocolParams& params, const StrategyProfile& profile,
                                Rng& rng, std::uint64_t run_id = 0) {
  return run_protocol_with(x, y, params, StrategyHooks(profile), rng, run_id);
}

/// Closed-form honest counters: 4n + 2l register units and
/// n(ceil(log2 l) + 2) + u ceil(log2 N) classical bits.
struct CommunicationCost {
  std::uint64_t qubit_units = 0;
  std::uint64_t classical_bits = 0;
};

inline CommunicationCost honest_communication_cost(std::size_t n, std::size_t l, std::size_t u,
                                                   std::size_t modulus) {
  return {4 * n + 2 * l, n * (ceil_log2(l) + 2) + u * register_qubits(modulus)};
}

// ---------------------------------------------------------------------------
// Single-element membership replay with decoy registers.

struct DecoyStats {
  std::size_t decoys = 0;
  std::size_t agree = 0;    // pair-basis outcome matches the sent "+"
  std::size_t flipped = 0;  // outcome "-"
  std::size_t corrupt = 0;  // outcome outside span{|0>, |j>}

  std::vector<std::uint64_t> histogram() const { return {agree, flipped, corrupt}; }
  DecoyStats& operator+=(const DecoyStats& o) {
    decoys += o.decoys;
    agree += o.agree;
    flipped += o.flipped;
    corrupt += o.corrupt;
    return *this;
  }
};

struct MembershipRun {
  Transcript transcript;
  std::uint8_t member = 0;
  DecoyStats decoys;
  // A verifier expecting every decoy back unchanged would abort here.
  bool strict_decoy_check_fails = false;
  std::optional<std::size_t> secret_leaked;  // Bob's readout of the real register
};

/// One secret k against Bob's set, l registers (one real, l-1 decoys
/// (|0>+|j_i>)/sqrt2 with uniform j_i), r_t uniform per position. With
/// `bob_measures` Bob reads every register in the computational basis and
/// re-sends (|0>+|j>)/sqrt2 for a nonzero readout j, or |0> otherwise.
inline MembershipRun run_membership_qosmdp(Element k, const PartyInput& y, std::size_t l, Rng& rng,
                                           bool bob_measures = false, std::uint64_t run_id = 0) {
  y.validate();
  const std::size_t modulus = y.modulus;
  if (k == 0 || k >= modulus) throw std::invalid_argument("secret must lie in [1, N-1]");
  if (l < 2) throw std::invalid_argument("need at least one decoy (l >= 2)");
  const std::size_t m_bits = register_qubits(modulus);
  using detail::str;

  MembershipRun out{Transcript(run_id), 0, {}, false, std::nullopt};
  Transcript& tr = out.transcript;

  const BitTable p = build_database(y);
  std::vector<std::uint8_t> r(l);
  std::vector<BitTable> tables;
  tables.reserve(l);
  for (std::size_t t = 0; t < l; ++t) {
    r[t] = bernoulli(rng, 0.5) ? 1 : 0;
    tables.push_back(mask_database(p, r[t]));
  }
  tr.record(1, Actor::kBob, "database", {{"tables", str(l)}});

  // Slot 0 is the real register; the rest are decoys.
  std::vector<Element> slot_element(l);
  slot_element[0] = k;
  for (std::size_t i = 1; i < l; ++i) {
    slot_element[i] = uniform_int<Element>(rng, 1, static_cast<Element>(modulus - 1));
  }
  std::vector<std::size_t> order(l);
  for (std::size_t i = 0; i < l; ++i) order[i] = i;
  order = sample_without_replacement(std::move(order), l, rng);  // order[w] = slot

  std::vector<Statevector> wire;
  wire.reserve(l);
  for (std::size_t w = 0; w < l; ++w) {
    wire.push_back(superposition_register(slot_element[order[w]], m_bits, +1));
  }
  tr.record(2, Actor::kAlice, "send_registers",
            {{"registers", str(l)}, {"physical_qubits", str(l * m_bits)}}, l);

  for (std::size_t w = 0; w < l; ++w) {
    if (bob_measures) {
      const std::size_t j = measure(wire[w], ComputationalBasis{}, rng).outcome;
      if (order[w] == 0) out.secret_leaked = j;
      wire[w] = j == 0 ? Statevector::basis(m_bits, 0) : superposition_register(j, m_bits, +1);
    }
    wire[w] = apply_oracle(wire[w], tables[w]);
  }
  tr.record(3, Actor::kBob, "return_registers", {{"registers", str(l)}}, l);

  std::size_t real_t = 0;
  for (std::size_t w = 0; w < l; ++w) {
    if (order[w] == 0) {
      real_t = w;
      continue;
    }
    ++out.decoys.decoys;
    const std::size_t o = measure(wire[w], PairBasis{slot_element[order[w]]}, rng).outcome;
    if (o == 0) {
      ++out.decoys.agree;
    } else if (o == 1) {
      ++out.decoys.flipped;
    } else {
      ++out.decoys.corrupt;
    }
  }
  out.strict_decoy_check_fails = out.decoys.flipped + out.decoys.corrupt > 0;
  tr.record(4, Actor::kAlice, "decoy_check",
            {{"decoys", str(out.decoys.decoys)},
             {"flipped", str(out.decoys.flipped)},
             {"corrupt", str(out.decoys.corrupt)}});

  Statevector reduced = wire[real_t];
  try {
    reduced = reduce_to_plus_minus(wire[real_t], k);
  } catch (const CorruptRegister&) {
    reduced = apply_reduction_circuit(wire[real_t], k);
  }
  const auto q = static_cast<std::uint8_t>(measure(reduced, plus_minus_basis(0), rng).outcome);
  tr.record(5, Actor::kAlice, "disclose", {{"t", str(real_t + 1)}, {"q", str(q)}}, 0,
            ceil_log2(l) + 1);

  out.member = static_cast<std::uint8_t>(q ^ r[real_t]);
  tr.record(6, Actor::kBob, "decide", {{"member", str(out.member)}});
  return out;
}

}  // namespace qpsi
