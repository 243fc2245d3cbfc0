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
 * Payoffs and equilibrium checks.
 *
 * Each party's result is labelled T (exactly X cap Y) or N (nothing, a
 * partial set, or a wrong set). Utilities follow the table indexed by
 * (own label, other label). Expected utilities are Monte-Carlo estimates over
 * freshly sampled input sets; a deviation "holds" (is unprofitable) only when
 * the honest mean exceeds the deviation mean by more than four standard
 * errors of the difference.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qpsi/protocol.hpp"
#include "qpsi/rng.hpp"
#include "qpsi/runner.hpp"
#include "qpsi/stats.hpp"
#include "qpsi/strategies.hpp"

namespace qpsi {

enum class Label { kTrue, kNull };

struct Payoffs {
  double tt = 0.5;
  double tn = 1.0;
  double nt = -0.5;
  double nn = 0.0;

  /// TN > TT > NN > NT.
  void validate() const {
    if (!(std::isfinite(tt) && std::isfinite(tn) && std::isfinite(nt) && std::isfinite(nn))) {
      throw std::invalid_argument("payoffs must be finite");
    }
    if (!(tn > tt && tt > nn && nn > nt)) {
      throw std::invalid_argument("payoffs violate the order U_TN > U_TT > U_NN > U_NT");
    }
  }

  double value(Label own, Label other) const {
    if (own == Label::kTrue) return other == Label::kTrue ? tt : tn;
    return other == Label::kTrue ? nt : nn;
  }

  bool operator==(const Payoffs&) const = default;
};

struct UtilityTable {
  Payoffs alice;
  Payoffs bob;

  static UtilityTable symmetric(const Payoffs& p) { return {p, p}; }
  /// TN = 1, TT = 1/2, NN = 0, with NT = -1/2 filling the last slot.
  static UtilityTable example() { return symmetric({0.5, 1.0, -0.5, 0.0}); }

  void validate() const {
    alice.validate();
    bob.validate();
  }
  bool operator==(const UtilityTable&) const = default;
};

struct PartyLabel {
  Label label = Label::kNull;
  bool wrong = false;  // held a set that is not the intersection

  bool operator==(const PartyLabel&) const = default;
};

struct OutcomeLabel {
  PartyLabel alice;
  PartyLabel bob;

  bool operator==(const OutcomeLabel&) const = default;
};

inline PartyLabel classify_one(const std::optional<ElementSet>& held, const ElementSet& truth) {
  if (!held) return {Label::kNull, false};
  if (*held == truth) return {Label::kTrue, false};
  return {Label::kNull, true};
}

inline OutcomeLabel classify(const Outcome& outcome, const ElementSet& truth) {
  return {classify_one(outcome.f_a, truth), classify_one(outcome.f_b, truth)};
}

// ---------------------------------------------------------------------------
// Monte-Carlo parameters and instance sampling.

struct GameParams {
  std::size_t N = 64;
  std::size_t n = 5;
  std::size_t m = 5;
  std::size_t u = 0;
  std::size_t l = 10;
  double theta = std::numbers::pi / 4.0;
  double noise = 0.0;
  double threshold = 0.05;

  void validate() const {
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    if (N <= 2 * std::max(n, m)) throw std::invalid_argument("N must exceed 2*max(n, m)");
    if (u > std::min(n, m)) throw std::invalid_argument("u must not exceed min(n, m)");
    if (l < 2 * n) throw std::invalid_argument("l must be >= 2n");
    if (!(theta >= 0.0 && theta <= std::numbers::pi / 4.0 + kAlgebraTolerance)) {
      throw std::invalid_argument("theta must lie in [0, pi/4]");
    }
    if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw std::invalid_argument("threshold must lie in [0, 1]");
    }
    register_qubits(N);
  }

  /// m + n < (N - 1)/2, the condition under which the equilibrium is claimed.
  bool equilibrium_condition() const { return 2 * (m + n) < N - 1; }

  ProtocolParams protocol() const { return {theta, l, noise, threshold}; }

  bool operator==(const GameParams&) const = default;
};

struct Instance {
  PartyInput x;
  PartyInput y;
  ElementSet truth;
};

/// X and Y uniform among subsets of Z_N^* of sizes n and m sharing exactly u
/// elements.
inline Instance sample_instance(const GameParams& params, Rng& rng) {
  std::vector<Element> pool(params.N - 1);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<Element>(i + 1);
  const std::size_t need = params.n + params.m - params.u;
  std::vector<Element> draw = sample_without_replacement(std::move(pool), need, rng);
  std::vector<Element> xs(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(params.n));
  std::vector<Element> ys(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(params.u));
  ys.insert(ys.end(), draw.begin() + static_cast<std::ptrdiff_t>(params.n), draw.end());
  Instance inst{PartyInput::honest(std::move(xs), params.N),
                PartyInput::honest(std::move(ys), params.N), {}};
  inst.truth = intersect(inst.x, inst.y);
  return inst;
}

struct TrialRecord {
  OutcomeLabel labels;
  double utility_a = 0.0;
  double utility_b = 0.0;
  int abort_step = 0;  // 0 when the run completed
  bool triggered = false;
  std::size_t substitutions = 0;
  std::size_t substitutes_in_c2 = 0;  // swapped-in elements that lie in Y \ X
};

inline TrialRecord play_trial(const StrategyProfile& profile, const GameParams& params,
                              const UtilityTable& table, Rng& rng, std::uint64_t run_id = 0) {
  const Instance inst = sample_instance(params, rng);
  const ProtocolRun run = run_protocol(inst.x, inst.y, params.protocol(), profile, rng, run_id);
  TrialRecord rec;
  rec.labels = classify(run.outcome, inst.truth);
  rec.utility_a = table.alice.value(rec.labels.alice.label, rec.labels.bob.label);
  rec.utility_b = table.bob.value(rec.labels.bob.label, rec.labels.alice.label);
  if (const auto& a = run.transcript.abort_info()) rec.abort_step = a->step;
  rec.triggered = run.diagnostics.deviation_triggered;
  rec.substitutions = run.diagnostics.substitutions;
  for (Element e : run.diagnostics.substitutes) {
    if (inst.y.contains(e) && !inst.x.contains(e)) ++rec.substitutes_in_c2;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Per-profile statistics.

enum class Deviator { kNone, kAlice, kBob };

inline std::string_view to_string(Deviator d) {
  switch (d) {
    case Deviator::kNone:
      return "none";
    case Deviator::kAlice:
      return "alice";
    case Deviator::kBob:
      return "bob";
  }
  return "?";
}

inline Deviator deviator_of(const StrategyProfile& p) {
  const bool a = !std::holds_alternative<alice::Honest>(p.alice);
  const bool b = !std::holds_alternative<bob::Honest>(p.bob);
  if (a && b) throw std::invalid_argument("profile deviates on both sides");
  return a ? Deviator::kAlice : (b ? Deviator::kBob : Deviator::kNone);
}

struct ProfileStats {
  std::string name;
  StrategyProfile profile;
  Deviator deviator = Deviator::kNone;
  std::uint64_t trials = 0;
  stats::Moments utility_a;
  stats::Moments utility_b;
  stats::Proportion alice_true;
  stats::Proportion bob_true;
  stats::Proportion alice_wrong;
  stats::Proportion bob_wrong;
  stats::Proportion any_wrong;
  stats::Proportion aborted;
  stats::Proportion triggered;
  std::uint64_t substitutions = 0;
  std::uint64_t substitutes_in_c2 = 0;
  std::map<int, std::uint64_t> abort_steps;

  void add(const TrialRecord& r) {
    ++trials;
    utility_a.add(r.utility_a);
    utility_b.add(r.utility_b);
    alice_true.add(r.labels.alice.label == Label::kTrue);
    bob_true.add(r.labels.bob.label == Label::kTrue);
    alice_wrong.add(r.labels.alice.wrong);
    bob_wrong.add(r.labels.bob.wrong);
    any_wrong.add(r.labels.alice.wrong || r.labels.bob.wrong);
    aborted.add(r.abort_step != 0);
    triggered.add(r.triggered);
    substitutions += r.substitutions;
    substitutes_in_c2 += r.substitutes_in_c2;
    if (r.abort_step != 0) ++abort_steps[r.abort_step];
  }

  /// Utility of the party whose behaviour differs from the suggestion
  /// (Alice for the honest profile).
  const stats::Moments& deviator_utility() const {
    return deviator == Deviator::kBob ? utility_b : utility_a;
  }
  const stats::Proportion& deviator_true() const {
    return deviator == Deviator::kBob ? bob_true : alice_true;
  }
  const stats::Proportion& other_wrong() const {
    return deviator == Deviator::kBob ? alice_wrong : bob_wrong;
  }
};

inline constexpr std::size_t kMinTrials = 1000;

inline ProfileStats expected_utilities(const StrategyProfile& profile, const GameParams& params,
                                       const UtilityTable& table, std::size_t trials,
                                       std::uint64_t seed, std::size_t workers = 1,
                                       std::string name = {}) {
  if (trials < kMinTrials) throw std::invalid_argument("at least 1000 trials required");
  params.validate();
  table.validate();
  ProfileStats out;
  out.profile = profile;
  out.deviator = deviator_of(profile);
  out.name = name.empty() ? to_string(profile) : std::move(name);
  const auto records = parallel_trials(trials, seed, workers, [&](std::size_t i, Rng& rng) {
    return play_trial(profile, params, table, rng, i);
  });
  for (const auto& r : records) out.add(r);
  return out;
}

// ---------------------------------------------------------------------------
// Verdicts.

enum class Verdict { kBaseline, kHolds, kFails, kInconclusive, kVacuous };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kBaseline:
      return "baseline";
    case Verdict::kHolds:
      return "holds";
    case Verdict::kFails:
      return "fails";
    case Verdict::kInconclusive:
      return "inconclusive";
    case Verdict::kVacuous:
      return "vacuous";
  }
  return "?";
}

inline Verdict parse_verdict(std::string_view s) {
  for (auto v : {Verdict::kBaseline, Verdict::kHolds, Verdict::kFails, Verdict::kInconclusive,
                 Verdict::kVacuous}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown verdict '" + std::string(s) + "'");
}

struct Comparison {
  double honest_mean = 0.0;
  double deviation_mean = 0.0;
  double sigma = 0.0;  // standard error of the difference
  Verdict verdict = Verdict::kInconclusive;

  /// (honest - deviation) in units of sigma; infinite when sigma is zero.
  double separation() const {
    const double d = honest_mean - deviation_mean;
    if (sigma > 0.0) return d / sigma;
    return d == 0.0 ? 0.0 : std::copysign(INFINITY, d);
  }
};

/// Strict-inequality test at 4 sigma. A deviation whose trigger condition
/// never arose is "vacuous": play was identical to the honest profile.
inline Comparison compare(const stats::Moments& honest, const stats::Moments& deviation,
                          bool ever_triggered, double k = 4.0) {
  Comparison c;
  c.honest_mean = honest.mean();
  c.deviation_mean = deviation.mean();
  c.sigma = std::sqrt(honest.standard_error() * honest.standard_error() +
                      deviation.standard_error() * deviation.standard_error());
  const double d = c.honest_mean - c.deviation_mean;
  if (!ever_triggered) {
    c.verdict = Verdict::kVacuous;
  } else if (c.sigma == 0.0) {
    c.verdict = d > 0.0 ? Verdict::kHolds : Verdict::kFails;
  } else if (d > k * c.sigma) {
    c.verdict = Verdict::kHolds;
  } else if (d < -k * c.sigma) {
    c.verdict = Verdict::kFails;
  } else {
    c.verdict = Verdict::kInconclusive;
  }
  return c;
}

struct NamedProfile {
  std::string name;
  StrategyProfile profile;
};

/// Every unilateral deviation studied: four by Alice, four by Bob.
inline std::vector<NamedProfile> deviation_catalog(std::size_t n) {
  std::vector<StrategyProfile> ps{
      {alice::ExtraElements{n}, bob::Honest{}},
      {alice::NoChecks{}, bob::Honest{}},
      {alice::WrongQt{1.0}, bob::Honest{}},
      {alice::WrongAnnounce{1.0}, bob::Honest{}},
      {alice::Honest{}, bob::WrongPj{1.0}},
      {alice::Honest{}, bob::MeasureResend{bob::ResendBasis::kComputational}},
      {alice::Honest{}, bob::MeasureResend{bob::ResendBasis::kPlusMinus}},
      {alice::Honest{}, bob::EntangleMeasure{0.9}},
  };
  std::vector<NamedProfile> out;
  for (auto& p : ps) {
    const std::string name = deviator_of(p) == Deviator::kAlice ? "alice:" + to_string(p.alice)
                                                                 : "bob:" + to_string(p.bob);
    out.push_back({name, p});
  }
  return out;
}

struct DeviationRow {
  ProfileStats stats;
  Comparison comparison;
};

struct EquilibriumReport {
  GameParams params;
  UtilityTable table;
  bool condition_met = true;
  std::string warning;
  ProfileStats honest;
  std::vector<DeviationRow> rows;

  bool all_hold() const {
    for (const auto& r : rows) {
      if (r.comparison.verdict != Verdict::kHolds) return false;
    }
    return true;
  }
  const DeviationRow* find(std::string_view name) const {
    for (const auto& r : rows) {
      if (r.stats.name == name) return &r;
    }
    return nullptr;
  }
};

/// Honest profile plus every catalog deviation. All profiles share the seed,
/// so trial i sees the same input sets under every profile.
inline EquilibriumReport strict_nash_report(const GameParams& params, const UtilityTable& table,
                                            std::size_t trials, std::uint64_t seed,
                                            std::size_t workers = 1) {
  EquilibriumReport rep;
  rep.params = params;
  rep.table = table;
  rep.condition_met = params.equilibrium_condition();
  if (!rep.condition_met) rep.warning = "m + n < (N - 1)/2 does not hold";
  rep.honest = expected_utilities(StrategyProfile::suggested(), params, table, trials, seed,
                                  workers, "honest");
  for (const auto& np : deviation_catalog(params.n)) {
    DeviationRow row{expected_utilities(np.profile, params, table, trials, seed, workers, np.name),
                     {}};
    const auto& honest_u =
        row.stats.deviator == Deviator::kBob ? rep.honest.utility_b : rep.honest.utility_a;
    row.comparison = compare(honest_u, row.stats.deviator_utility(), row.stats.triggered.hits > 0);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

struct FairnessRow {
  std::string name;
  Deviator deviator = Deviator::kAlice;
  double p_true_deviation = 0.0;  // deviator's own P[f = X cap Y]
  double p_true_honest = 0.0;     // same party under the suggested profile
  double sigma = 0.0;
  Verdict probability_form = Verdict::kInconclusive;
  double utility_deviation = 0.0;  // E[U] of the deviator, shown against U_TT
  double utility_tt = 0.0;
  double other_wrong = 0.0;  // correctness: honest party holding a wrong set
  double any_wrong = 0.0;

  bool operator==(const FairnessRow&) const = default;
};

struct FairnessReport {
  double honest_p_true_a = 0.0;
  double honest_p_true_b = 0.0;
  double honest_wrong = 0.0;
  std::vector<FairnessRow> rows;
};

inline FairnessReport fairness_correctness_report(const EquilibriumReport& eq) {
  FairnessReport out;
  out.honest_p_true_a = eq.honest.alice_true.mean();
  out.honest_p_true_b = eq.honest.bob_true.mean();
  out.honest_wrong = eq.honest.any_wrong.mean();
  for (const auto& r : eq.rows) {
    const auto& s = r.stats;
    const bool bob = s.deviator == Deviator::kBob;
    const auto& honest_p = bob ? eq.honest.bob_true : eq.honest.alice_true;
    FairnessRow row;
    row.name = s.name;
    row.deviator = s.deviator;
    row.p_true_deviation = s.deviator_true().mean();
    row.p_true_honest = honest_p.mean();
    const double sd = s.deviator_true().sigma(), sh = honest_p.sigma();
    row.sigma = std::sqrt(sd * sd + sh * sh);
    stats::Moments hm, dm;
    hm.count = honest_p.trials;
    hm.sum = hm.sum_sq = static_cast<double>(honest_p.hits);
    dm.count = s.deviator_true().trials;
    dm.sum = dm.sum_sq = static_cast<double>(s.deviator_true().hits);
    row.probability_form = compare(hm, dm, s.triggered.hits > 0).verdict;
    row.utility_deviation = s.deviator_utility().mean();
    row.utility_tt = bob ? eq.table.bob.tt : eq.table.alice.tt;
    row.other_wrong = s.other_wrong().mean();
    row.any_wrong = s.any_wrong.mean();
    out.rows.push_back(row);
  }
  return out;
}

inline FairnessReport fairness_correctness_report(const GameParams& params,
                                                  const UtilityTable& table, std::size_t trials,
                                                  std::uint64_t seed, std::size_t workers = 1) {
  return fairness_correctness_report(strict_nash_report(params, table, trials, seed, workers));
}

// ---------------------------------------------------------------------------
// Closed forms.

struct Eq1Result {
  double p_c2 = 0.0;  // substituted element lands in Y \ X
  double p_c1 = 0.0;  // ... or outside X cup Y
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Expected payoff of a one-element substitution against honest play:
/// P(C2) U_TN + P(C1) U_NN < U_TT.
inline Eq1Result eq1_bound(std::size_t N, std::size_t n, std::size_t m, std::size_t u,
                           const Payoffs& payoffs) {
  if (u > std::min(n, m)) throw std::invalid_argument("u must not exceed min(n, m)");
  if (n + m >= N - 1 || N < 2) throw std::invalid_argument("need n + m < N - 1");
  Eq1Result r;
  r.p_c2 = static_cast<double>(m - u) / static_cast<double>(N - 1 - n);
  r.p_c1 = 1.0 - r.p_c2;
  r.lhs = r.p_c2 * payoffs.tn + r.p_c1 * payoffs.nn;
  r.rhs = payoffs.tt;
  r.holds = r.lhs < r.rhs;
  return r;
}

/// Tail bound for the mean of k draws without replacement from n values in
/// [a, b]: exp(-2 delta^2 k n / ((n - k + 1)(b - a))).
inline double serfling_bound(double delta, std::size_t n, std::size_t k, double a, double b) {
  if (!(delta > 0.0)) throw std::domain_error("delta must be positive");
  if (k < 1 || k > n) throw std::domain_error("need 1 <= k <= n");
  if (!(b > a)) throw std::domain_error("need b > a");
  const double kn = static_cast<double>(k) * static_cast<double>(n);
  return std::exp(-2.0 * delta * delta * kn / (static_cast<double>(n - k + 1) * (b - a)));
}

/// Large-n form of the bound at k = n/2 and b - a = 1, where
/// kn/(n - k + 1) is replaced by n: exp(-2 delta^2 n).
inline double serfling_half_sample_bound(double delta, std::size_t n) {
  if (!(delta > 0.0)) throw std::domain_error("delta must be positive");
  if (n < 1) throw std::domain_error("n must be positive");
  return std::exp(-2.0 * delta * delta * static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Report records (JSON Lines) and the CSV table.

struct ReportRecord {
  std::string profile;
  std::string deviator;
  std::uint64_t trials = 0;
  double mean_a = 0.0;
  double ci_a = 0.0;  // 4-sigma half width
  double mean_b = 0.0;
  double ci_b = 0.0;
  std::string verdict;
  double separation = 0.0;  // in sigmas; +-inf encoded as +-1e308
  double wrong_freq = 0.0;
  double p_alice_true = 0.0;
  double p_bob_true = 0.0;
  double p_alice_wrong = 0.0;
  double p_bob_wrong = 0.0;
  double triggered = 0.0;
  std::uint64_t substitutions = 0;
  std::uint64_t substitutes_in_c2 = 0;
  std::map<int, std::uint64_t> abort_steps;

  bool operator==(const ReportRecord&) const = default;
};

inline ReportRecord make_record(const ProfileStats& s, Verdict verdict, double separation) {
  ReportRecord r;
  r.profile = s.name;
  r.deviator = std::string(to_string(s.deviator));
  r.trials = s.trials;
  r.mean_a = s.utility_a.mean();
  r.ci_a = 4.0 * s.utility_a.standard_error();
  r.mean_b = s.utility_b.mean();
  r.ci_b = 4.0 * s.utility_b.standard_error();
  r.verdict = std::string(to_string(verdict));
  r.separation = std::isfinite(separation) ? separation : std::copysign(1e308, separation);
  r.wrong_freq = s.any_wrong.mean();
  r.p_alice_true = s.alice_true.mean();
  r.p_bob_true = s.bob_true.mean();
  r.p_alice_wrong = s.alice_wrong.mean();
  r.p_bob_wrong = s.bob_wrong.mean();
  r.triggered = s.triggered.mean();
  r.substitutions = s.substitutions;
  r.substitutes_in_c2 = s.substitutes_in_c2;
  r.abort_steps = s.abort_steps;
  return r;
}

inline std::vector<ReportRecord> report_records(const EquilibriumReport& rep) {
  std::vector<ReportRecord> out{make_record(rep.honest, Verdict::kBaseline, 0.0)};
  for (const auto& row : rep.rows) {
    out.push_back(make_record(row.stats, row.comparison.verdict, row.comparison.separation()));
  }
  return out;
}

inline nlohmann::json to_json(const ReportRecord& r) {
  nlohmann::json steps = nlohmann::json::object();
  for (const auto& [k, v] : r.abort_steps) steps[std::to_string(k)] = v;
  return {{"profile", r.profile},
          {"deviator", r.deviator},
          {"trials", r.trials},
          {"mean_a", r.mean_a},
          {"ci_a", r.ci_a},
          {"mean_b", r.mean_b},
          {"ci_b", r.ci_b},
          {"verdict", r.verdict},
          {"separation", r.separation},
          {"wrong_freq", r.wrong_freq},
          {"p_alice_true", r.p_alice_true},
          {"p_bob_true", r.p_bob_true},
          {"p_alice_wrong", r.p_alice_wrong},
          {"p_bob_wrong", r.p_bob_wrong},
          {"triggered", r.triggered},
          {"substitutions", r.substitutions},
          {"substitutes_in_c2", r.substitutes_in_c2},
          {"abort_steps", steps}};
}

inline ReportRecord record_from_json(const nlohmann::json& j) {
  ReportRecord r;
  try {
    r.profile = j.at("profile").get<std::string>();
    r.deviator = j.at("deviator").get<std::string>();
    r.trials = j.at("trials").get<std::uint64_t>();
    r.mean_a = j.at("mean_a").get<double>();
    r.ci_a = j.at("ci_a").get<double>();
    r.mean_b = j.at("mean_b").get<double>();
    r.ci_b = j.at("ci_b").get<double>();
    r.verdict = j.at("verdict").get<std::string>();
    r.separation = j.at("separation").get<double>();
    r.wrong_freq = j.at("wrong_freq").get<double>();
    r.p_alice_true = j.at("p_alice_true").get<double>();
    r.p_bob_true = j.at("p_bob_true").get<double>();
    r.p_alice_wrong = j.at("p_alice_wrong").get<double>();
    r.p_bob_wrong = j.at("p_bob_wrong").get<double>();
    r.triggered = j.at("triggered").get<double>();
    r.substitutions = j.at("substitutions").get<std::uint64_t>();
    r.substitutes_in_c2 = j.at("substitutes_in_c2").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("abort_steps").items()) {
      r.abort_steps[std::stoi(k)] = v.get<std::uint64_t>();
    }
  } catch (const std::exception& ex) {
    throw std::invalid_argument(std::string("malformed report record: ") + ex.what());
  }
  parse_verdict(r.verdict);
  return r;
}

inline std::string to_jsonl(const std::vector<ReportRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<ReportRecord> parse_report_jsonl(std::string_view text) {
  std::vector<ReportRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw std::invalid_argument(std::string("malformed report line: ") + ex.what());
    }
  }
  return out;
}

inline nlohmann::json to_json(const FairnessRow& r) {
  return {{"profile", r.name},
          {"deviator", std::string(to_string(r.deviator))},
          {"p_true_deviation", r.p_true_deviation},
          {"p_true_honest", r.p_true_honest},
          {"sigma", r.sigma},
          {"probability_form", std::string(to_string(r.probability_form))},
          {"utility_deviation", r.utility_deviation},
          {"utility_tt", r.utility_tt},
          {"other_wrong", r.other_wrong},
          {"any_wrong", r.any_wrong}};
}

inline FairnessRow fairness_from_json(const nlohmann::json& j) {
  FairnessRow r;
  try {
    r.name = j.at("profile").get<std::string>();
    const auto dev = j.at("deviator").get<std::string>();
    if (dev == "alice") {
      r.deviator = Deviator::kAlice;
    } else if (dev == "bob") {
      r.deviator = Deviator::kBob;
    } else {
      throw std::invalid_argument("deviator must be alice or bob");
    }
    r.p_true_deviation = j.at("p_true_deviation").get<double>();
    r.p_true_honest = j.at("p_true_honest").get<double>();
    r.sigma = j.at("sigma").get<double>();
    r.probability_form = parse_verdict(j.at("probability_form").get<std::string>());
    r.utility_deviation = j.at("utility_deviation").get<double>();
    r.utility_tt = j.at("utility_tt").get<double>();
    r.other_wrong = j.at("other_wrong").get<double>();
    r.any_wrong = j.at("any_wrong").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("malformed fairness record: ") + ex.what());
  }
  return r;
}

inline std::string to_jsonl(const FairnessReport& rep) {
  std::string out;
  for (const auto& r : rep.rows) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<FairnessRow> parse_fairness_jsonl(std::string_view text) {
  std::vector<FairnessRow> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(fairness_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw std::invalid_argument(std::string("malformed fairness line: ") + ex.what());
    }
  }
  return out;
}

inline constexpr std::string_view kCsvHeader =
    "profile,E[U_A],CI_A,E[U_B],CI_B,verdict,wrong_freq,abort_step_histogram";

/// "13:5;20:3"; empty when nothing aborted.
inline std::string format_histogram(const std::map<int, std::uint64_t>& h) {
  std::string out;
  for (const auto& [step, count] : h) {
    if (!out.empty()) out += ';';
    out += std::to_string(step) + ":" + std::to_string(count);
  }
  return out;
}

inline std::map<int, std::uint64_t> parse_histogram(std::string_view s) {
  std::map<int, std::uint64_t> out;
  while (!s.empty()) {
    const auto semi = s.find(';');
    const std::string_view item = s.substr(0, semi);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("malformed histogram");
    try {
      out[std::stoi(std::string(item.substr(0, colon)))] =
          std::stoull(std::string(item.substr(colon + 1)));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("malformed histogram");
    }
    if (semi == std::string_view::npos) break;
    s = s.substr(semi + 1);
  }
  return out;
}

/// The CSV columns of a record; the rest of the record is JSONL-only.
struct CsvRow {
  std::string profile;
  double mean_a = 0.0, ci_a = 0.0, mean_b = 0.0, ci_b = 0.0;
  std::string verdict;
  double wrong_freq = 0.0;
  std::map<int, std::uint64_t> abort_steps;

  bool operator==(const CsvRow&) const = default;
};

inline CsvRow csv_row(const ReportRecord& r) {
  return {r.profile, r.mean_a, r.ci_a, r.mean_b, r.ci_b, r.verdict, r.wrong_freq, r.abort_steps};
}

inline std::string to_csv(const std::vector<ReportRecord>& records) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    if (r.profile.find_first_of(",\"\n") != std::string::npos) {
      throw std::invalid_argument("profile name not CSV-safe: " + r.profile);
    }
    out += r.profile + ',' + detail::format_number(r.mean_a) + ',' +
           detail::format_number(r.ci_a) + ',' + detail::format_number(r.mean_b) + ',' +
           detail::format_number(r.ci_b) + ',' + r.verdict + ',' +
           detail::format_number(r.wrong_freq) + ',' + format_histogram(r.abort_steps) + '\n';
  }
  return out;
}

inline std::vector<CsvRow> parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("bad CSV header");
  std::vector<CsvRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 8) throw std::invalid_argument("CSV row needs 8 cells: " + line);
    CsvRow r;
    r.profile = cells[0];
    r.mean_a = detail::parse_number(cells[1]);
    r.ci_a = detail::parse_number(cells[2]);
    r.mean_b = detail::parse_number(cells[3]);
    r.ci_b = detail::parse_number(cells[4]);
    r.verdict = cells[5];
    parse_verdict(r.verdict);
    r.wrong_freq = detail::parse_number(cells[6]);
    r.abort_steps = parse_histogram(cells[7]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace qpsi
