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
 * Ordered event log of a protocol run. Counters are cumulative and stamped on
 * every event; an abort is always the last event.
 *
 * On disk a transcript is JSON Lines, one flat object per event:
 *   {"actor":"bob","classical_bits":0,"kind":"abort","payload":{...},
 *    "qubit_units":20,"run_id":3,"step":10}
 * Keys are emitted sorted so equal transcripts serialize to equal bytes.
 */
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace qpsi {

enum class Actor { kAlice, kBob, kChannel };

inline std::string_view to_string(Actor a) {
  switch (a) {
    case Actor::kAlice:
      return "alice";
    case Actor::kBob:
      return "bob";
    case Actor::kChannel:
      return "channel";
  }
  return "?";
}

inline Actor parse_actor(std::string_view s) {
  if (s == "alice") return Actor::kAlice;
  if (s == "bob") return Actor::kBob;
  if (s == "channel") return Actor::kChannel;
  throw std::invalid_argument("unknown actor '" + std::string(s) + "'");
}

using Payload = std::map<std::string, std::string>;

struct TranscriptEvent {
  std::uint64_t run_id = 0;
  int step = 0;
  Actor actor = Actor::kChannel;
  std::string kind;
  Payload payload;
  std::uint64_t qubit_units = 0;     // cumulative
  std::uint64_t classical_bits = 0;  // cumulative

  bool operator==(const TranscriptEvent&) const = default;
};

struct AbortInfo {
  int step = 0;
  Actor actor = Actor::kChannel;
  std::string reason;

  bool operator==(const AbortInfo&) const = default;
};

inline constexpr std::string_view kAbortKind = "abort";

class Transcript {
 public:
  explicit Transcript(std::uint64_t run_id = 0) : run_id_(run_id) {}

  /// Appends an event after adding the deltas to the running counters.
  void record(int step, Actor actor, std::string kind, Payload payload = {},
              std::uint64_t qubit_delta = 0, std::uint64_t classical_delta = 0) {
    if (abort_) throw std::logic_error("transcript already ended in an abort");
    if (kind == kAbortKind) throw std::invalid_argument("use abort() to record an abort");
    qubits_ += qubit_delta;
    classical_ += classical_delta;
    events_.push_back({run_id_, step, actor, std::move(kind), std::move(payload), qubits_,
                       classical_});
  }

  void abort(int step, Actor actor, std::string reason) {
    if (abort_) throw std::logic_error("transcript already ended in an abort");
    events_.push_back({run_id_, step, actor, std::string(kAbortKind), {{"reason", reason}},
                       qubits_, classical_});
    abort_ = AbortInfo{step, actor, std::move(reason)};
  }

  std::uint64_t run_id() const { return run_id_; }
  const std::vector<TranscriptEvent>& events() const { return events_; }
  std::uint64_t qubits_sent() const { return qubits_; }
  std::uint64_t classical_bits_sent() const { return classical_; }
  bool aborted() const { return abort_.has_value(); }
  const std::optional<AbortInfo>& abort_info() const { return abort_; }

  /// First event of the given kind, if any.
  const TranscriptEvent* find(std::string_view kind) const {
    for (const auto& e : events_) {
      if (e.kind == kind) return &e;
    }
    return nullptr;
  }

  /// Rebuilds a transcript from parsed events, re-checking its invariants.
  static Transcript from_events(std::vector<TranscriptEvent> events) {
    Transcript t(events.empty() ? 0 : events.front().run_id);
    std::uint64_t last_q = 0, last_c = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      if (e.run_id != t.run_id_) throw std::invalid_argument("mixed run ids in one transcript");
      if (e.qubit_units < last_q || e.classical_bits < last_c) {
        throw std::invalid_argument("transcript counters decrease");
      }
      if (t.abort_) throw std::invalid_argument("event after abort");
      last_q = e.qubit_units;
      last_c = e.classical_bits;
      if (e.kind == kAbortKind) {
        auto it = e.payload.find("reason");
        t.abort_ = AbortInfo{e.step, e.actor, it == e.payload.end() ? "" : it->second};
      }
    }
    t.qubits_ = last_q;
    t.classical_ = last_c;
    t.events_ = std::move(events);
    return t;
  }

  bool operator==(const Transcript&) const = default;

 private:
  std::uint64_t run_id_;
  std::vector<TranscriptEvent> events_;
  std::uint64_t qubits_ = 0;
  std::uint64_t classical_ = 0;
  std::optional<AbortInfo> abort_;
};

// ---------------------------------------------------------------------------
// JSON Lines.

inline nlohmann::json to_json(const TranscriptEvent& e) {
  nlohmann::json payload = nlohmann::json::object();
  for (const auto& [k, v] : e.payload) payload[k] = v;
  return {{"run_id", e.run_id},         {"step", e.step},
          {"actor", to_string(e.actor)}, {"kind", e.kind},
          {"payload", payload},          {"qubit_units", e.qubit_units},
          {"classical_bits", e.classical_bits}};
}

inline TranscriptEvent event_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> kKeys{"actor", "classical_bits", "kind", "payload",
                                              "qubit_units", "run_id", "step"};
  if (!j.is_object() || j.size() != kKeys.size()) {
    throw std::invalid_argument("transcript event must have exactly the fields " +
                                nlohmann::json(kKeys).dump());
  }
  TranscriptEvent e;
  try {
    e.run_id = j.at("run_id").get<std::uint64_t>();
    e.step = j.at("step").get<int>();
    e.actor = parse_actor(j.at("actor").get<std::string>());
    e.kind = j.at("kind").get<std::string>();
    for (const auto& [k, v] : j.at("payload").items()) e.payload[k] = v.get<std::string>();
    e.qubit_units = j.at("qubit_units").get<std::uint64_t>();
    e.classical_bits = j.at("classical_bits").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw std::invalid_argument(std::string("malformed transcript event: ") + ex.what());
  }
  return e;
}

inline std::string to_jsonl(const Transcript& t) {
  std::string out;
  for (const auto& e : t.events()) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

/// Parses a JSONL stream holding one or more transcripts. Events of one run
/// must be contiguous; runs keep their file order.
inline std::vector<Transcript> parse_transcripts_jsonl(std::string_view text) {
  std::vector<Transcript> out;
  std::vector<TranscriptEvent> current;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.empty()) out.push_back(Transcript::from_events(std::move(current)));
    current.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& ex) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + ex.what());
    }
    TranscriptEvent e = event_from_json(j);
    if (!current.empty() && current.front().run_id != e.run_id) flush();
    current.push_back(std::move(e));
  }
  flush();
  return out;
}

}  // namespace qpsi
