// Copyright 2026 The tetshift Authors.
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

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tetshift/bytes.hpp"

namespace tetshift::runtime {

using ObjectId = std::uint64_t;
using HandlerId = std::uint32_t;

// Location-transparent name of a mobile object. The high word is the home
// context plus one, so a zero id is never valid.
struct MobilePointer {
  ObjectId id = 0;

  bool valid() const { return id != 0; }
  int home() const { return static_cast<int>(id >> 32) - 1; }

  friend bool operator==(const MobilePointer&, const MobilePointer&) = default;
  friend auto operator<=>(const MobilePointer&, const MobilePointer&) = default;
};

std::string to_string(MobilePointer p);

// The only unit of communication. Always crosses a channel as bytes.
struct Envelope {
  HandlerId handler = 0;
  MobilePointer target;
  MobilePointer from;   // sending object; invalid when injected by the driver
  Bytes payload;
  int sender = -1;      // sending context; -1 for the driver
  std::uint64_t seq = 0;
  std::string phase;    // audit label of the sending object
  std::int64_t load = 0;  // sender context backlog, piggybacked for balancing

  Bytes pack() const;
  // Throws Error(MalformedBuffer).
  static Envelope unpack(std::span<const std::uint8_t> bytes);
};

struct EventId {
  ObjectId owner = 0;
  std::uint64_t serial = 0;

  friend bool operator==(const EventId&, const EventId&) = default;
  friend auto operator<=>(const EventId&, const EventId&) = default;
};

class MobileObject {
 public:
  virtual ~MobileObject() = default;
  // Key into the factory table used to rebuild the object after a move.
  virtual std::string type_name() const = 0;
  virtual Bytes pack() const = 0;
};

using Factory = std::function<std::unique_ptr<MobileObject>(std::span<const std::uint8_t>)>;

class Runtime;
struct Job;

// Handed to every handler. Sends are buffered and leave the context once the
// handler returns, so a throwing handler sends nothing.
class HandlerContext {
 public:
  MobilePointer self() const { return self_; }
  int context() const { return context_; }
  MobileObject& object() { return *object_; }
  template <class T>
  T& as() {
    return dynamic_cast<T&>(*object_);
  }

  void send(MobilePointer target, HandlerId handler, Bytes payload = {});
  // Action runs on this object once every dep has satisfied the event.
  // Throws Error(InvalidArgument) for an empty dep set.
  EventId create_event(std::vector<MobilePointer> deps, HandlerId action, Bytes payload = {});
  void satisfy(EventId event, MobilePointer dep);
  // Label under which this object's sends are audited.
  void set_phase(std::string label);
  const std::string& phase() const;
  void note(const std::string& event, const std::string& detail);
  void add_time(const std::string& phase, double seconds);

 private:
  friend class Runtime;
  HandlerContext(Runtime& rt, Job& job, int context);

  Runtime& rt_;
  Job& job_;
  int context_;
  MobilePointer self_;
  MobileObject* object_;
};

using Handler = std::function<void(HandlerContext&, const Envelope&)>;

struct ContextAudit {
  std::int64_t p2pSent = 0;
  std::int64_t p2pReceived = 0;
  std::int64_t forwarded = 0;
  std::int64_t migrationsIn = 0;
  std::int64_t migrationsOut = 0;
  // Largest number of distinct destinations any object on this context sent
  // to under one phase label.
  std::int64_t maxFanoutPerPhase = 0;
};

struct MessageAudit {
  std::vector<ContextAudit> contexts;
  // (object, phase) -> distinct destinations
  std::map<std::pair<ObjectId, std::string>, std::set<ObjectId>> fanout;
  // The runtime offers no collective primitive; this stays zero by construction.
  std::int64_t collectives = 0;
  std::int64_t inFlight = 0;

  std::int64_t total_sent() const;
  std::int64_t total_received() const;
};

struct RuntimeOptions {
  int contexts = 1;
  int handlerWorkers = 1;
  // Greedy work requests from idle contexts to their busiest known peer.
  bool balance = false;
  bool audit = true;
};

// Picks one of n enabled actions during a simulated run.
using Chooser = std::function<std::size_t(std::size_t n)>;

class Runtime {
 public:
  explicit Runtime(RuntimeOptions options);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  int contexts() const;
  const RuntimeOptions& options() const;

  void register_type(const std::string& name, Factory factory);
  void register_handler(HandlerId id, std::string name, Handler handler);

  // Only while quiescent.
  MobilePointer register_object(std::unique_ptr<MobileObject> object, int context = 0);
  // Driver-side operations; they take effect once run.
  void invoke(MobilePointer target, HandlerId handler, Bytes payload = {});
  void migrate(MobilePointer target, int destination);
  EventId create_event(MobilePointer owner, std::vector<MobilePointer> deps, HandlerId action,
                       Bytes payload = {});
  void satisfy(EventId event, MobilePointer dep);

  // Runs pump and handler threads until nothing is in flight, then joins
  // them. Rethrows the first handler exception.
  void run();
  // Single-threaded run where the chooser picks, at every step, which channel
  // head to pump or which context to run a handler on.
  void run_simulated(const Chooser& choose);

  // Quiescent-only inspection. Throw Error(UnknownObject).
  int location(MobilePointer p) const;
  MobileObject& object(MobilePointer p);
  template <class T>
  T& object_as(MobilePointer p) {
    return dynamic_cast<T&>(object(p));
  }
  std::vector<MobilePointer> objects() const;

  MessageAudit message_audit() const;
  // `phase,context,event,detail` lines, sorted.
  std::vector<std::string> audit_log() const;
  void write_audit_log(std::ostream& os) const;

  // Per context: phase -> seconds attributed by handlers, plus the
  // conversion time spent packing and unpacking.
  std::vector<std::map<std::string, double>> phase_times() const;
  // Seconds spent inside run() calls so far.
  double wall_seconds() const;

 private:
  friend class HandlerContext;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tetshift::runtime
