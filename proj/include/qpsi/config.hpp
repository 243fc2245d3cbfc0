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
 * Batch configuration: a flat JSON object. Every key is optional; unknown
 * keys are rejected.
 *
 *   N n m u l theta noise threshold trials seed    numbers
 *   u_tt u_tn u_nt u_nn                            payoffs (both parties)
 *   alice bob                                      strategy descriptors
 *   X Y                                            explicit sets (arrays)
 *   k                                              membership secret
 *   out                                            output directory
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qpsi/game.hpp"
#include "qpsi/protocol.hpp"
#include "qpsi/strategies.hpp"

namespace qpsi {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Config {
  GameParams params;
  UtilityTable table = UtilityTable::example();
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  StrategyProfile profile;
  std::optional<std::vector<Element>> x;
  std::optional<std::vector<Element>> y;
  std::optional<Element> k;
  std::string out = "qpsi_out";

  bool operator==(const Config&) const = default;
};

/// Checks every cross-field precondition; messages name the violated one.
inline void validate(const Config& c) {
  try {
    c.table.validate();
    c.params.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  if (c.trials < 1) throw ConfigError("trials must be at least 1");
  if (c.x.has_value() != c.y.has_value()) throw ConfigError("X and Y must be given together");
  if (c.x) {
    try {
      const auto px = PartyInput::honest(*c.x, c.params.N);
      const auto py = PartyInput::honest(*c.y, c.params.N);
      if (px.size() != c.params.n) throw ConfigError("|X| must equal n");
      if (py.size() != c.params.m) throw ConfigError("|Y| must equal m");
      if (intersect(px, py).size() != c.params.u) throw ConfigError("|X cap Y| must equal u");
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
  }
  if (c.k && (*c.k == 0 || *c.k >= c.params.N)) throw ConfigError("k must lie in [1, N-1]");
  if (c.out.empty()) throw ConfigError("out must not be empty");
}

namespace detail {

inline std::size_t as_count(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(key + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline double as_real(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(key + " must be finite");
  return d;
}

inline std::vector<Element> as_elements(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key + " must be an array of integers");
  std::vector<Element> out;
  for (const auto& e : v) out.push_back(static_cast<Element>(as_count(e, key)));
  return out;
}

}  // namespace detail

/// Parses and validates. Missing keys take the defaults; if X and Y are
/// given, n, m and u default to their sizes.
inline Config parse_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  Config c;
  bool n_set = false, m_set = false, u_set = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "N") {
      c.params.N = detail::as_count(v, key);
    } else if (key == "n") {
      c.params.n = detail::as_count(v, key);
      n_set = true;
    } else if (key == "m") {
      c.params.m = detail::as_count(v, key);
      m_set = true;
    } else if (key == "u") {
      c.params.u = detail::as_count(v, key);
      u_set = true;
    } else if (key == "l") {
      c.params.l = detail::as_count(v, key);
    } else if (key == "theta") {
      c.params.theta = detail::as_real(v, key);
    } else if (key == "noise") {
      c.params.noise = detail::as_real(v, key);
    } else if (key == "threshold") {
      c.params.threshold = detail::as_real(v, key);
    } else if (key == "trials") {
      c.trials = detail::as_count(v, key);
    } else if (key == "seed") {
      c.seed = detail::as_count(v, key);
    } else if (key == "u_tt") {
      c.table.alice.tt = c.table.bob.tt = detail::as_real(v, key);
    } else if (key == "u_tn") {
      c.table.alice.tn = c.table.bob.tn = detail::as_real(v, key);
    } else if (key == "u_nt") {
      c.table.alice.nt = c.table.bob.nt = detail::as_real(v, key);
    } else if (key == "u_nn") {
      c.table.alice.nn = c.table.bob.nn = detail::as_real(v, key);
    } else if (key == "alice" || key == "bob") {
      if (!v.is_string()) throw ConfigError(key + " must be a strategy descriptor string");
      try {
        if (key == "alice") {
          c.profile.alice = parse_alice_strategy(v.get<std::string>());
        } else {
          c.profile.bob = parse_bob_strategy(v.get<std::string>());
        }
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
      }
    } else if (key == "X") {
      c.x = detail::as_elements(v, key);
    } else if (key == "Y") {
      c.y = detail::as_elements(v, key);
    } else if (key == "k") {
      c.k = static_cast<Element>(detail::as_count(v, key));
    } else if (key == "out") {
      if (!v.is_string()) throw ConfigError("out must be a string");
      c.out = v.get<std::string>();
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (c.x && c.y) {
    if (!n_set) c.params.n = c.x->size();
    if (!m_set) c.params.m = c.y->size();
    if (!u_set) {
      std::size_t common = 0;
      for (Element e : *c.x) common += std::count(c.y->begin(), c.y->end(), e) > 0 ? 1 : 0;
      c.params.u = common;
    }
  }
  validate(c);
  return c;
}

/// Full snapshot with every key spelled out; parse_config() reads it back
/// to an equal Config.
inline std::string to_config_json(const Config& c) {
  if (!(c.table.alice == c.table.bob)) {
    throw std::invalid_argument("only symmetric payoff tables can be written as config");
  }
  nlohmann::json j{{"N", c.params.N},
                   {"n", c.params.n},
                   {"m", c.params.m},
                   {"u", c.params.u},
                   {"l", c.params.l},
                   {"theta", c.params.theta},
                   {"noise", c.params.noise},
                   {"threshold", c.params.threshold},
                   {"trials", c.trials},
                   {"seed", c.seed},
                   {"u_tt", c.table.alice.tt},
                   {"u_tn", c.table.alice.tn},
                   {"u_nt", c.table.alice.nt},
                   {"u_nn", c.table.alice.nn},
                   {"alice", to_string(c.profile.alice)},
                   {"bob", to_string(c.profile.bob)},
                   {"out", c.out}};
  if (c.x) j["X"] = *c.x;
  if (c.y) j["Y"] = *c.y;
  if (c.k) j["k"] = *c.k;
  return j.dump(2) + "\n";
}

}  // namespace qpsi
