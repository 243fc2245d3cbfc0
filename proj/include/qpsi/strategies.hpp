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
 * Player behaviours. Each strategy is a plain value; the protocol runner
 * consumes them through a hook object so the suggested profile can also be run
 * with every hook resolved at compile time (see HonestHooks).
 *
 * Descriptor syntax used in config files: `name[:key=value[,key=value]]`,
 * e.g. `entangle_measure:eta=0.9` or `wrong_announce:rate=1`.
 */
#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "qpsi/rng.hpp"
#include "qpsi/statevec.hpp"

namespace qpsi {

namespace alice {
struct Honest {
  bool operator==(const Honest&) const = default;
};
// Adds `count` fake elements on top of the 2n registers.
struct ExtraElements {
  std::size_t count = 1;
  bool operator==(const ExtraElements&) const = default;
};
// Sends fake elements in the check slots and spends the disclosure budget on
// them instead of on the actual registers.
struct NoChecks {
  bool operator==(const NoChecks&) const = default;
};
// Misreports q_t where she already knows r_t and found p(j) = 1.
struct WrongQt {
  double rate = 1.0;
  bool operator==(const WrongQt&) const = default;
};
// Substitutes announced elements with draws from Z_N^* \ X.
struct WrongAnnounce {
  double rate = 1.0;
  bool operator==(const WrongAnnounce&) const = default;
};
}  // namespace alice

using AliceStrategy = std::variant<alice::Honest, alice::ExtraElements, alice::NoChecks,
                                   alice::WrongQt, alice::WrongAnnounce>;

namespace bob {
enum class ResendBasis { kComputational, kPlusMinus };

struct Honest {
  bool operator==(const Honest&) const = default;
};
// Declares p = 1 where the true value is 0.
struct WrongPj {
  double rate = 1.0;
  bool operator==(const WrongPj&) const = default;
};
struct MeasureResend {
  ResendBasis basis = ResendBasis::kComputational;
  bool operator==(const MeasureResend&) const = default;
};
struct EntangleMeasure {
  double eta = 0.9;
  bool operator==(const EntangleMeasure&) const = default;
};
}  // namespace bob

using BobStrategy =
    std::variant<bob::Honest, bob::WrongPj, bob::MeasureResend, bob::EntangleMeasure>;

struct StrategyProfile {
  AliceStrategy alice = alice::Honest{};
  BobStrategy bob = bob::Honest{};

  // ((cooperate, abort), (cooperate, abort))
  static StrategyProfile suggested() { return {}; }
  bool is_suggested() const {
    return std::holds_alternative<alice::Honest>(alice) && std::holds_alternative<bob::Honest>(bob);
  }
  bool operator==(const StrategyProfile&) const = default;
};

// ---------------------------------------------------------------------------
// Validation and descriptors.

namespace detail {

inline void check_rate(double rate, bool allow_zero) {
  if (!(rate <= 1.0 && (allow_zero ? rate >= 0.0 : rate > 0.0))) {
    throw std::invalid_argument("strategy rate out of range");
  }
}

// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s) {
  std::string tmp(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tmp, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + tmp + "'");
  }
  if (used != tmp.size() || !std::isfinite(v)) throw std::invalid_argument("not a number: '" + tmp + "'");
  return v;
}

struct Descriptor {
  std::string name;
  std::map<std::string, std::string> params;
};

inline Descriptor split_descriptor(std::string_view text) {
  Descriptor d;
  auto colon = text.find(':');
  d.name = std::string(text.substr(0, colon));
  if (d.name.empty()) throw std::invalid_argument("empty strategy name");
  if (colon == std::string_view::npos) return d;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw std::invalid_argument("malformed strategy parameter '" + std::string(item) + "'");
    }
    d.params.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return d;
}

inline void expect_keys(const Descriptor& d, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : d.params) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw std::invalid_argument("unknown parameter '" + k + "' for strategy " + d.name);
  }
}

inline double number_or(const Descriptor& d, const std::string& key, double fallback) {
  auto it = d.params.find(key);
  return it == d.params.end() ? fallback : parse_number(it->second);
}

}  // namespace detail

inline void validate(const AliceStrategy& s) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, alice::ExtraElements>) {
          if (v.count < 1) throw std::invalid_argument("extra_elements count must be >= 1");
        } else if constexpr (std::is_same_v<T, alice::WrongQt> ||
                             std::is_same_v<T, alice::WrongAnnounce>) {
          detail::check_rate(v.rate, true);
        }
      },
      s);
}

inline void validate(const BobStrategy& s) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bob::WrongPj>) {
          detail::check_rate(v.rate, false);
        } else if constexpr (std::is_same_v<T, bob::EntangleMeasure>) {
          if (!(v.eta >= 0.0 && v.eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
        }
      },
      s);
}

inline std::string to_string(const AliceStrategy& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, alice::Honest>) return "honest";
        if constexpr (std::is_same_v<T, alice::ExtraElements>)
          return "extra_elements:count=" + std::to_string(v.count);
        if constexpr (std::is_same_v<T, alice::NoChecks>) return "no_checks";
        if constexpr (std::is_same_v<T, alice::WrongQt>)
          return "wrong_qt:rate=" + detail::format_number(v.rate);
        if constexpr (std::is_same_v<T, alice::WrongAnnounce>)
          return "wrong_announce:rate=" + detail::format_number(v.rate);
      },
      s);
}

inline std::string to_string(const BobStrategy& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bob::Honest>) return "honest";
        if constexpr (std::is_same_v<T, bob::WrongPj>)
          return "wrong_pj:rate=" + detail::format_number(v.rate);
        if constexpr (std::is_same_v<T, bob::MeasureResend>)
          return std::string("measure_resend:basis=") +
                 (v.basis == bob::ResendBasis::kComputational ? "computational" : "pm");
        if constexpr (std::is_same_v<T, bob::EntangleMeasure>)
          return "entangle_measure:eta=" + detail::format_number(v.eta);
      },
      s);
}

inline std::string to_string(const StrategyProfile& p) {
  return "alice=" + to_string(p.alice) + " bob=" + to_string(p.bob);
}

inline AliceStrategy parse_alice_strategy(std::string_view text) {
  const auto d = detail::split_descriptor(text);
  AliceStrategy out;
  if (d.name == "honest") {
    detail::expect_keys(d, {});
    out = alice::Honest{};
  } else if (d.name == "extra_elements") {
    detail::expect_keys(d, {"count"});
    const double c = detail::number_or(d, "count", 1.0);
    if (c < 1.0 || c != std::floor(c)) throw std::invalid_argument("count must be a positive integer");
    out = alice::ExtraElements{static_cast<std::size_t>(c)};
  } else if (d.name == "no_checks") {
    detail::expect_keys(d, {});
    out = alice::NoChecks{};
  } else if (d.name == "wrong_qt") {
    detail::expect_keys(d, {"rate"});
    out = alice::WrongQt{detail::number_or(d, "rate", 1.0)};
  } else if (d.name == "wrong_announce") {
    detail::expect_keys(d, {"rate"});
    out = alice::WrongAnnounce{detail::number_or(d, "rate", 1.0)};
  } else {
    throw std::invalid_argument("unknown Alice strategy '" + d.name + "'");
  }
  validate(out);
  return out;
}

inline BobStrategy parse_bob_strategy(std::string_view text) {
  const auto d = detail::split_descriptor(text);
  BobStrategy out;
  if (d.name == "honest") {
    detail::expect_keys(d, {});
    out = bob::Honest{};
  } else if (d.name == "wrong_pj") {
    detail::expect_keys(d, {"rate"});
    out = bob::WrongPj{detail::number_or(d, "rate", 1.0)};
  } else if (d.name == "measure_resend") {
    detail::expect_keys(d, {"basis"});
    auto it = d.params.find("basis");
    const std::string basis = it == d.params.end() ? "computational" : it->second;
    if (basis == "computational") {
      out = bob::MeasureResend{bob::ResendBasis::kComputational};
    } else if (basis == "pm") {
      out = bob::MeasureResend{bob::ResendBasis::kPlusMinus};
    } else {
      throw std::invalid_argument("measure_resend basis must be computational or pm");
    }
  } else if (d.name == "entangle_measure") {
    detail::expect_keys(d, {"eta"});
    out = bob::EntangleMeasure{detail::number_or(d, "eta", 0.9)};
  } else {
    throw std::invalid_argument("unknown Bob strategy '" + d.name + "'");
  }
  validate(out);
  return out;
}

// ---------------------------------------------------------------------------
// Channel attacks on a single register.

struct ResendResult {
  Statevector state;
  std::string outcome_label;
  // Computational outcome Bob read off; empty for sign-only measurements.
  std::optional<std::size_t> learned;
};

/// Bob's measurement basis for a measure-resend attack. Bob does not know the
/// element in a register, so the pair basis uses a uniformly guessed
/// j' in [1, modulus - 1].
inline MeasurementBasis resend_basis(bob::ResendBasis kind, std::size_t modulus, Rng& rng) {
  if (kind == bob::ResendBasis::kComputational) return ComputationalBasis{};
  return PairBasis{uniform_int<std::size_t>(rng, 1, modulus - 1)};
}

/// Measures `reg` and forwards the collapsed state.
inline ResendResult apply_measure_resend(const Statevector& reg, const MeasurementBasis& basis,
                                         Rng& rng) {
  Measurement m = measure(reg, basis, rng);
  ResendResult out{std::move(m.state), m.label, std::nullopt};
  if (std::holds_alternative<ComputationalBasis>(basis)) out.learned = m.outcome;
  return out;
}

enum class AncillaLabel { kE00, kE01 };

struct EntangleResult {
  Statevector state;
  AncillaLabel label;
};

namespace detail {

// Two computational states spanning the register's working subspace:
// {0, j} for (|0>+-|j>)/sqrt2 and |j>, {0, 2^(M-1)} for |0...0>.
inline std::pair<std::size_t, std::size_t> working_pair(const Statevector& reg) {
  const auto sup = reg.support();
  const std::size_t top = std::size_t{1} << (reg.num_qubits() - 1);
  if (sup.size() == 1) {
    return sup[0] == 0 ? std::pair{std::size_t{0}, top} : std::pair{std::size_t{0}, sup[0]};
  }
  if (sup.size() == 2) return {sup[0], sup[1]};
  throw CorruptRegister("entangle-measure attack needs a two-dimensional working subspace");
}

}  // namespace detail

/// Q_AB with orthogonal ancilla outcomes: with probability eta the register
/// passes intact (E00), otherwise it is replaced by its orthogonal partner
/// within the working subspace (E01).
inline EntangleResult apply_entangle_measure(const Statevector& reg, double eta, Rng& rng) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  if (eta >= 1.0 || bernoulli(rng, eta)) return {reg, AncillaLabel::kE00};
  const auto [a, b] = detail::working_pair(reg);
  std::vector<Amplitude> amps(reg.dimension());
  amps[a] = -std::conj(reg[b]);
  amps[b] = std::conj(reg[a]);
  return {Statevector(reg.num_qubits(), std::move(amps)), AncillaLabel::kE01};
}

// ---------------------------------------------------------------------------
// Hooks consumed by the protocol runner.

/// Runtime hooks derived from a strategy profile.
class StrategyHooks {
 public:
  explicit StrategyHooks(StrategyProfile profile) : profile_(std::move(profile)) {
    validate(profile_.alice);
    validate(profile_.bob);
  }
  const StrategyProfile& profile() const { return profile_; }

  std::size_t extra_elements() const {
    if (auto* s = std::get_if<alice::ExtraElements>(&profile_.alice)) return s->count;
    return 0;
  }
  bool checks_replaced_by_fakes() const {
    return std::holds_alternative<alice::NoChecks>(profile_.alice);
  }
  double wrong_qt_rate() const {
    if (auto* s = std::get_if<alice::WrongQt>(&profile_.alice)) return s->rate;
    return 0.0;
  }
  double wrong_announce_rate() const {
    if (auto* s = std::get_if<alice::WrongAnnounce>(&profile_.alice)) return s->rate;
    return 0.0;
  }
  double wrong_pj_rate() const {
    if (auto* s = std::get_if<bob::WrongPj>(&profile_.bob)) return s->rate;
    return 0.0;
  }
  std::optional<bob::ResendBasis> measure_resend() const {
    if (auto* s = std::get_if<bob::MeasureResend>(&profile_.bob)) return s->basis;
    return std::nullopt;
  }
  std::optional<double> entangle_eta() const {
    if (auto* s = std::get_if<bob::EntangleMeasure>(&profile_.bob)) return s->eta;
    return std::nullopt;
  }

 private:
  StrategyProfile profile_;
};

/// The suggested profile with every deviation point fixed at compile time.
struct HonestHooks {
  static constexpr std::size_t extra_elements() { return 0; }
  static constexpr bool checks_replaced_by_fakes() { return false; }
  static constexpr double wrong_qt_rate() { return 0.0; }
  static constexpr double wrong_announce_rate() { return 0.0; }
  static constexpr double wrong_pj_rate() { return 0.0; }
  static constexpr std::optional<bob::ResendBasis> measure_resend() { return std::nullopt; }
  static constexpr std::optional<double> entangle_eta() { return std::nullopt; }
};

inline StrategyHooks deviation_hooks(const StrategyProfile& profile) {
  return StrategyHooks(profile);
}

}  // namespace qpsi
