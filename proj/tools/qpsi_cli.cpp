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

// Batch front end.
//
//   qpsi run         protocol runs, transcripts and an outcome summary
//   qpsi nash        equilibrium, fairness and correctness reports
//   qpsi bounds      closed-form quantities for the configured parameters
//   qpsi membership  single-element membership replay with decoys
//
// Exit codes: 0 ok, 2 configuration error, 3 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qpsi/config.hpp"
#include "qpsi/game.hpp"
#include "qpsi/keygen.hpp"
#include "qpsi/protocol.hpp"
#include "qpsi/runner.hpp"

namespace fs = std::filesystem;
using namespace qpsi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  std::size_t workers = 1;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("error writing " + path.string());
}

Config load_config(const Flags& flags) {
  Config c = flags.config_path.empty() ? Config{} : parse_config(read_file(flags.config_path));
  if (flags.seed) c.seed = *flags.seed;
  if (flags.trials) c.trials = *flags.trials;
  if (flags.out) c.out = *flags.out;
  validate(c);
  return c;
}

fs::path prepare_output(const Config& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + c.out);
  write_file(dir / "config.json", to_config_json(c));
  return dir;
}

std::string set_text(const std::optional<ElementSet>& s) {
  if (!s) return "bottom";
  std::string out = "{";
  for (Element e : *s) out += (out.size() > 1 ? "," : "") + std::to_string(e);
  return out + "}";
}

std::string fixed(double v, int digits = 5) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------

struct RunResult {
  std::string jsonl;
  std::optional<ElementSet> f_a, f_b;
  ElementSet truth;
  int abort_step = 0;
  std::uint64_t qubit_units = 0;
  std::uint64_t classical_bits = 0;
};

int cmd_run(const Config& c, std::size_t workers) {
  const auto results = parallel_trials(c.trials, c.seed, workers, [&](std::size_t i, Rng& rng) {
    Instance inst = c.x ? Instance{PartyInput::honest(*c.x, c.params.N),
                                   PartyInput::honest(*c.y, c.params.N), {}}
                        : sample_instance(c.params, rng);
    inst.truth = intersect(inst.x, inst.y);
    const ProtocolRun run = run_protocol(inst.x, inst.y, c.params.protocol(), c.profile, rng, i);
    RunResult r{to_jsonl(run.transcript), run.outcome.f_a, run.outcome.f_b, inst.truth, 0,
                run.transcript.qubits_sent(), run.transcript.classical_bits_sent()};
    if (run.transcript.aborted()) r.abort_step = run.transcript.abort_info()->step;
    return r;
  });

  const fs::path dir = prepare_output(c);
  std::string transcripts;
  std::map<int, std::uint64_t> aborts;
  std::uint64_t completed = 0, a_true = 0, b_true = 0;
  for (const auto& r : results) {
    transcripts += r.jsonl;
    if (r.abort_step) {
      ++aborts[r.abort_step];
    } else {
      ++completed;
    }
    if (r.f_a == r.truth) ++a_true;
    if (r.f_b == r.truth) ++b_true;
  }
  write_file(dir / "transcripts.jsonl", transcripts);

  const auto closed =
      honest_communication_cost(c.params.n, c.params.l, c.params.u, c.params.N);
  const RunResult& first = results.front();
  nlohmann::json summary{{"runs", c.trials},
                         {"completed", completed},
                         {"aborts", format_histogram(aborts)},
                         {"alice_true", a_true},
                         {"bob_true", b_true},
                         {"profile", to_string(c.profile)},
                         {"first_run",
                          {{"f_a", set_text(first.f_a)},
                           {"f_b", set_text(first.f_b)},
                           {"truth", set_text(first.truth)},
                           {"abort_step", first.abort_step},
                           {"qubit_units", first.qubit_units},
                           {"classical_bits", first.classical_bits}}},
                         {"honest_closed_form",
                          {{"qubit_units", closed.qubit_units},
                           {"classical_bits", closed.classical_bits}}}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "profile: " << to_string(c.profile) << "\n"
            << "runs: " << c.trials << "  completed: " << completed
            << "  aborted: " << (c.trials - completed);
  if (!aborts.empty()) std::cout << " (step:count " << format_histogram(aborts) << ")";
  std::cout << "\n"
            << "f_A = X cap Y in " << a_true << " runs, f_B = X cap Y in " << b_true << " runs\n"
            << "run 0: f_A=" << set_text(first.f_a) << " f_B=" << set_text(first.f_b)
            << " truth=" << set_text(first.truth);
  if (first.abort_step) std::cout << " abort at step " << first.abort_step;
  std::cout << "\n"
            << "run 0: qubit units = " << first.qubit_units
            << ", classical bits = " << first.classical_bits << "\n"
            << "honest closed form: qubit units = 4n+2l = " << closed.qubit_units
            << ", classical bits = n(ceil(log2 l)+2)+u*ceil(log2 N) = " << closed.classical_bits
            << "\n"
            << "wrote " << (dir / "transcripts.jsonl").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_nash(const Config& c, std::size_t workers) {
  if (c.trials < kMinTrials) throw ConfigError("nash needs trials >= 1000");
  const EquilibriumReport eq = strict_nash_report(c.params, c.table, c.trials, c.seed, workers);
  const FairnessReport fair = fairness_correctness_report(eq);
  const auto records = report_records(eq);

  const fs::path dir = prepare_output(c);
  write_file(dir / "report.jsonl", to_jsonl(records));
  write_file(dir / "report.csv", to_csv(records));
  write_file(dir / "fairness.jsonl", to_jsonl(fair));

  if (!eq.condition_met) std::cout << "warning: " << eq.warning << "\n";
  std::cout << std::left << std::setw(40) << "profile" << std::setw(20) << "E[U_A] +- 4se"
            << std::setw(20) << "E[U_B] +- 4se" << std::setw(14) << "verdict"
            << "aborts\n";
  for (const auto& r : records) {
    std::cout << std::setw(40) << r.profile << std::setw(20)
              << (fixed(r.mean_a, 4) + " +- " + fixed(r.ci_a, 4)) << std::setw(20)
              << (fixed(r.mean_b, 4) + " +- " + fixed(r.ci_b, 4)) << std::setw(14) << r.verdict
              << format_histogram(r.abort_steps) << "\n";
  }
  std::cout << "\nfairness (deviator's P[f = X cap Y]) and correctness (other party wrong)\n";
  for (const auto& r : fair.rows) {
    std::cout << std::setw(40) << r.name << "P_dev=" << fixed(r.p_true_deviation, 4)
              << " P_honest=" << fixed(r.p_true_honest, 4) << " "
              << std::setw(13) << to_string(r.probability_form)
              << " E[U_dev]=" << fixed(r.utility_deviation, 4) << " vs U_TT=" << r.utility_tt
              << " wrong=" << fixed(r.other_wrong, 4) << "\n";
  }
  if (c.params.n + c.params.m < c.params.N - 1) {
    const Eq1Result e = eq1_bound(c.params.N, c.params.n, c.params.m, c.params.u, c.table.alice);
    std::cout << "\nsubstitution bound: P(C2)=" << fixed(e.p_c2) << " lhs=" << fixed(e.lhs)
              << " rhs=" << fixed(e.rhs) << " -> " << (e.holds ? "holds" : "does not hold")
              << "\n";
  }
  std::cout << "wrote " << (dir / "report.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_bounds(const Config& c) {
  const auto& p = c.params;
  std::cout << "theta = " << fixed(p.theta, 6) << "\n"
            << "helstrom guess probability = " << fixed(helstrom_guess_probability(p.theta))
            << "\n"
            << "conclusive rate = " << fixed(conclusive_rate(p.theta)) << "\n\n"
            << "serfling bound (b - a = 1, k = n/2): exact and exp(-2 delta^2 n)\n";
  for (double delta : {0.05, 0.1, 0.2}) {
    for (std::size_t n : {std::size_t{2} * p.n, std::size_t{100}, std::size_t{1000}}) {
      const std::size_t k = std::max<std::size_t>(1, n / 2);
      std::cout << "  delta=" << delta << " n=" << n << " k=" << k
                << "  exact=" << fixed(serfling_bound(delta, n, k, 0.0, 1.0), 9)
                << "  half-sample=" << fixed(serfling_half_sample_bound(delta, n), 9) << "\n";
    }
  }
  std::cout << "\n";
  if (p.n + p.m < p.N - 1) {
    const Eq1Result e = eq1_bound(p.N, p.n, p.m, p.u, c.table.alice);
    std::cout << "substitution bound: P(C2)=" << fixed(e.p_c2) << " P(C1)=" << fixed(e.p_c1)
              << " lhs=" << fixed(e.lhs) << " rhs=" << fixed(e.rhs) << " -> "
              << (e.holds ? "holds" : "does not hold") << "\n";
  } else {
    std::cout << "substitution bound: n + m < N - 1 does not hold\n";
  }
  const auto cost = honest_communication_cost(p.n, p.l, p.u, p.N);
  std::cout << "communication (n=" << p.n << ", l=" << p.l << ", u=" << p.u << ", N=" << p.N
            << "): " << cost.qubit_units << " register-units, " << cost.classical_bits
            << " classical bits\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct MembershipResult {
  std::string jsonl;
  DecoyStats decoys;
  bool correct = false;
  bool strict_fail = false;
  bool leaked = false;
};

int cmd_membership(const Config& c, std::size_t workers) {
  bool attack = false;
  if (const auto* mr = std::get_if<bob::MeasureResend>(&c.profile.bob)) {
    if (mr->basis != bob::ResendBasis::kComputational) {
      throw ConfigError("membership supports bob = honest or measure_resend:basis=computational");
    }
    attack = true;
  } else if (!std::holds_alternative<bob::Honest>(c.profile.bob)) {
    throw ConfigError("membership supports bob = honest or measure_resend:basis=computational");
  }
  if (c.params.l < 2) throw ConfigError("membership needs l >= 2");

  const auto results = parallel_trials(c.trials, c.seed, workers, [&](std::size_t i, Rng& rng) {
    const PartyInput y = c.y ? PartyInput::honest(*c.y, c.params.N) : sample_instance(c.params, rng).y;
    const Element k = c.k ? *c.k : uniform_int<Element>(rng, 1, static_cast<Element>(c.params.N - 1));
    const MembershipRun run = run_membership_qosmdp(k, y, c.params.l, rng, attack, i);
    return MembershipResult{to_jsonl(run.transcript), run.decoys,
                            run.member == (y.contains(k) ? 1 : 0), run.strict_decoy_check_fails,
                            run.secret_leaked == k};
  });

  const fs::path dir = prepare_output(c);
  std::string transcripts;
  DecoyStats total;
  std::uint64_t correct = 0, strict = 0, leaked = 0;
  for (const auto& r : results) {
    transcripts += r.jsonl;
    total += r.decoys;
    correct += r.correct;
    strict += r.strict_fail;
    leaked += r.leaked;
  }
  write_file(dir / "membership.jsonl", transcripts);
  stats::Proportion flips{total.flipped, total.decoys};
  nlohmann::json summary{{"runs", c.trials},
                         {"attack", attack ? "measure_resend:basis=computational" : "none"},
                         {"decoys", total.decoys},
                         {"decoy_agree", total.agree},
                         {"decoy_flipped", total.flipped},
                         {"decoy_corrupt", total.corrupt},
                         {"membership_correct", correct},
                         {"strict_decoy_check_fails", strict},
                         {"secret_leaked", leaked}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "runs: " << c.trials << "  attack: " << (attack ? "measure-resend" : "none") << "\n"
            << "decoys: " << total.decoys << "  agree=" << total.agree
            << " flipped=" << total.flipped << " corrupt=" << total.corrupt << "\n"
            << "decoy flip rate = " << fixed(flips.mean()) << " +- " << fixed(flips.sigma())
            << "\n"
            << "membership bit correct in " << correct << " runs\n"
            << "a verifier demanding unchanged decoys would abort " << strict << " runs\n"
            << "secret read by Bob in " << leaked << " runs\n";
  return kExitOk;
}

void add_common_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--seed", flags.seed, "Base seed (overrides config)");
  cmd->add_option("--trials", flags.trials, "Number of runs (overrides config)");
  cmd->add_option("--out", flags.out, "Output directory (overrides config)");
  cmd->add_option("--workers", flags.workers, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rational quantum private-set-intersection simulator"};
  app.require_subcommand(1);
  Flags flags;
  CLI::App* run = app.add_subcommand("run", "Run the protocol and write transcripts");
  CLI::App* nash = app.add_subcommand("nash", "Estimate utilities and equilibrium verdicts");
  CLI::App* bounds = app.add_subcommand("bounds", "Print closed-form bounds");
  CLI::App* membership = app.add_subcommand("membership", "Replay the membership protocol");
  for (CLI::App* cmd : {run, nash, bounds, membership}) add_common_flags(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const Config config = load_config(flags);
    if (run->parsed()) return cmd_run(config, flags.workers);
    if (nash->parsed()) return cmd_nash(config, flags.workers);
    if (bounds->parsed()) return cmd_bounds(config);
    return cmd_membership(config, flags.workers);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}
