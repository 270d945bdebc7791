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

#include "tetshift/orchestrator/driver.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <ostream>
#include <type_traits>

#include "tetshift/decomp.hpp"
#include "tetshift/error.hpp"
#include "tetshift/merge.hpp"
#include "tetshift/orchestrator/invariants.hpp"
#include "tetshift/orchestrator/shift.hpp"
#include "tetshift/serialize.hpp"

namespace tetshift::orch {

using runtime::Envelope;
using runtime::EventId;
using runtime::HandlerContext;
using runtime::HandlerId;
using runtime::MobileObject;
using runtime::MobilePointer;

namespace {

enum : HandlerId {
  hStart = 1,
  hStatus,
  hLuby,
  hChoice,
  hAccept,
  hShift,
  hShiftReady,
  hHolders,
  hHoldersReady,
  hReport,
  hVerdict,
  hDone,
};

using Clock = std::chrono::steady_clock;

// Archive ------------------------------------------------------------------

template <class T>
struct is_vector : std::false_type {};
template <class T, class A>
struct is_vector<std::vector<T, A>> : std::true_type {};
template <class T>
struct is_set : std::false_type {};
template <class T, class C, class A>
struct is_set<std::set<T, C, A>> : std::true_type {};
template <class T>
struct is_map : std::false_type {};
template <class K, class V, class C, class A>
struct is_map<std::map<K, V, C, A>> : std::true_type {};
template <class T>
struct is_pair : std::false_type {};
template <class A, class B>
struct is_pair<std::pair<A, B>> : std::true_type {};

struct Writer;
struct Reader;

template <class T>
void put(ByteWriter& w, const T& x);
template <class T>
void get(ByteReader& r, T& x);

struct Writer {
  static constexpr bool kWriting = true;
  ByteWriter w;
  template <class... T>
  void operator()(T&... xs) {
    (put(w, xs), ...);
  }
};

struct Reader {
  static constexpr bool kWriting = false;
  explicit Reader(std::span<const std::uint8_t> b) : r(b) {}
  ByteReader r;
  template <class... T>
  void operator()(T&... xs) {
    (get(r, xs), ...);
  }
};

template <class T>
void put(ByteWriter& w, const T& x) {
  if constexpr (std::is_same_v<T, bool>) {
    w.u64(x ? 1 : 0);
  } else if constexpr (std::is_integral_v<T> || std::is_enum_v<T>) {
    w.i64(static_cast<std::int64_t>(x));
  } else if constexpr (std::is_floating_point_v<T>) {
    w.f64(x);
  } else if constexpr (std::is_same_v<T, std::string>) {
    w.str(x);
  } else if constexpr (std::is_same_v<T, Bytes>) {
    w.bytes(x);
  } else if constexpr (std::is_same_v<T, GlobalId>) {
    w.i64(x.owner);
    w.i64(x.local);
  } else if constexpr (std::is_same_v<T, MobilePointer>) {
    w.u64(x.id);
  } else if constexpr (std::is_same_v<T, EventId>) {
    w.u64(x.owner);
    w.u64(x.serial);
  } else if constexpr (is_pair<T>::value) {
    put(w, x.first);
    put(w, x.second);
  } else if constexpr (is_vector<T>::value || is_set<T>::value || is_map<T>::value) {
    w.u64(x.size());
    for (const auto& e : x) put(w, e);
  } else {
    Writer a;
    fields(a, const_cast<T&>(x));
    w.bytes(a.w.buffer());
  }
}

template <class T>
void get(ByteReader& r, T& x) {
  if constexpr (std::is_same_v<T, bool>) {
    x = r.u64() != 0;
  } else if constexpr (std::is_integral_v<T> || std::is_enum_v<T>) {
    x = static_cast<T>(r.i64());
  } else if constexpr (std::is_floating_point_v<T>) {
    x = r.f64();
  } else if constexpr (std::is_same_v<T, std::string>) {
    x = r.str();
  } else if constexpr (std::is_same_v<T, Bytes>) {
    x = r.bytes();
  } else if constexpr (std::is_same_v<T, GlobalId>) {
    x.owner = r.i64();
    x.local = r.i64();
  } else if constexpr (std::is_same_v<T, MobilePointer>) {
    x.id = r.u64();
  } else if constexpr (std::is_same_v<T, EventId>) {
    x.owner = r.u64();
    x.serial = r.u64();
  } else if constexpr (is_pair<T>::value) {
    get(r, x.first);
    get(r, x.second);
  } else if constexpr (is_vector<T>::value) {
    x.clear();
    for (auto n = r.count(8); n > 0; --n) {
      typename T::value_type e{};
      get(r, e);
      x.push_back(std::move(e));
    }
  } else if constexpr (is_set<T>::value) {
    x.clear();
    for (auto n = r.count(8); n > 0; --n) {
      typename T::value_type e{};
      get(r, e);
      x.insert(std::move(e));
    }
  } else if constexpr (is_map<T>::value) {
    x.clear();
    for (auto n = r.count(8); n > 0; --n) {
      std::pair<typename T::key_type, typename T::mapped_type> e{};
      get(r, e);
      x.emplace(std::move(e));
    }
  } else {
    Bytes b = r.bytes();
    Reader a(b);
    fields(a, x);
  }
}

template <class... T>
Bytes encode(const T&... xs) {
  Writer a;
  (put(a.w, xs), ...);
  return a.w.take();
}

template <class... T>
void decode(std::span<const std::uint8_t> b, T&... xs) {
  Reader a(b);
  (get(a.r, xs), ...);
  if (!a.r.done()) throw Error(ErrorCode::MalformedBuffer, "trailing bytes in message");
}

// Protocol state ------------------------------------------------------------

enum class Role : int { Idle = 0, Receiver = 1, Sender = 2 };
enum class Stage : int {
  Idle,
  WaitStatus,
  WaitVerdict,
  Luby,
  Roles,
  WaitChoices,
  WaitAccept,
  WaitShift,
  WaitHolders,
  Done,
};

struct Status {
  std::int64_t count = 0;
  std::int64_t ifaceLow = 0;
  bool wasReceiver = false;
};
template <class A>
void fields(A& a, Status& s) {
  a(s.count, s.ifaceLow, s.wasReceiver);
}

// Messages for one iteration, possibly received before this subdomain got
// there.
struct IterBuf {
  std::map<int, Status> status;
  std::map<int, std::map<int, int>> luby;  // neighbor -> round -> LubyState
  std::map<int, std::pair<bool, Bytes>> choice;
  int accept = -1;
  std::map<int, Bytes> shift;
  std::map<int, Bytes> holders;
  bool shiftFired = false;
  bool holdersFired = false;
  int verdict = -1;
  int planRole = 0;
  int planReceiver = -1;
  std::vector<int> planIn;
};
template <class A>
void fields(A& a, IterBuf& b) {
  a(b.status, b.luby, b.choice, b.accept, b.shift, b.holders, b.shiftFired, b.holdersFired,
    b.verdict, b.planRole, b.planReceiver, b.planIn);
}

struct Report {
  int id = 0;
  Status status;
  std::vector<int> nbrs;
  int prevRole = 0;
  int prevReceiver = -1;
  int accepted = 0;
  int rejected = 0;
  bool overGathered = false;
  std::int64_t tets = 0;
  std::int64_t edges = 0;
  std::int64_t edgesInBand = 0;
  double minQ = 1.0;
  double sumQ = 0.0;
  Bytes snapshot;
};
template <class A>
void fields(A& a, Report& r) {
  a(r.id, r.status, r.nbrs, r.prevRole, r.prevReceiver, r.accepted, r.rejected, r.overGathered,
    r.tets, r.edges, r.edgesInBand, r.minQ, r.sumQ, r.snapshot);
}

}  // namespace

template <class A>
void fields(A& a, IterationLog& l) {
  a(l.iteration, l.tets, l.lowQuality, l.lowQualityFrozen, l.minQ, l.meanQ, l.edges, l.edgesInBand,
    l.receivers, l.shipments, l.rejected, l.overGathered);
}

template <class A>
void fields(A& a, ShiftPlan& p) {
  a(p.receivers, p.senders, p.layersFresh, p.layersAdapted, p.seedConnectivity);
}

namespace {

struct Shared {
  RunConfig cfg;
  MetricField field;
  double volume = 0.0;
  int n = 0;
};

struct Timer {
  HandlerContext& c;
  const char* phase;
  Clock::time_point t0 = Clock::now();
  ~Timer() { c.add_time(phase, std::chrono::duration<double>(Clock::now() - t0).count()); }
};

std::string label(int k) {
  std::string s = std::to_string(k);
  return "iter" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

std::uint64_t kernel_seed(std::uint64_t seed, int id, int k) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(id) * 7919ULL + static_cast<std::uint64_t>(k);
}

class SubdomainActor final : public MobileObject {
 public:
  SubdomainActor(std::shared_ptr<const Shared> sh, Subdomain s)
      : sub(std::move(s)), sh_(std::move(sh)) {}

  std::string type_name() const override { return "subdomain"; }

  Bytes pack() const override {
    Writer a;
    Bytes s = tetshift::pack(sub);
    a(s);
    const_cast<SubdomainActor*>(this)->visit(a);
    return a.w.take();
  }

  static std::unique_ptr<MobileObject> unpack(std::shared_ptr<const Shared> sh,
                                              std::span<const std::uint8_t> b) {
    Reader a(b);
    Bytes s;
    a(s);
    auto actor = std::make_unique<SubdomainActor>(std::move(sh), tetshift::unpack(s));
    actor->visit(a);
    return actor;
  }

  template <class A>
  void visit(A& a) {
    a(peers_, master_, k_, stage_, nbrs_, myCount_, myIfaceLow_, wasReceiver_, prevRole_,
      prevReceiver_, prevAccepted_, prevRejected_, prevOver_, lubyState_, lubyRound_, role_,
      receiver_, inNbrs_, shipTets_, shipment_, offered_, overGathered_, shipHolders_, accepted_,
      rejected_, evShift_, evHolders_, buf_);
  }

  // Handlers ---------------------------------------------------------------

  void on_start(HandlerContext& c, const Envelope& e) {
    decode(e.payload, peers_, master_);
    c.set_phase("init");
    {
      Timer t{c, "adaptation"};
      auto kc = sh_->cfg.kernel;
      kc.phase = kernel::AdaptConfig::Phase::InitialInterior;
      kc.seed = kernel_seed(sh_->cfg.seed, sub.id, 0);
      kernel::adapt(sub, sh_->field, kc, sh_->cfg.threads);
      sub.state.phase = SubdomainState::Phase::InteriorAdapted;
    }
    begin(c, 1);
    progress(c);
  }

  void on_status(HandlerContext& c, const Envelope& e) {
    int k, from;
    Status s;
    decode(e.payload, k, from, s);
    buf_[k].status[from] = s;
    progress(c);
  }

  void on_luby(HandlerContext& c, const Envelope& e) {
    int k, from, r, state;
    decode(e.payload, k, from, r, state);
    buf_[k].luby[from][r] = state;
    progress(c);
  }

  void on_choice(HandlerContext& c, const Envelope& e) {
    int k, from;
    bool offered;
    Bytes ship;
    decode(e.payload, k, from, offered, ship);
    buf_[k].choice[from] = {offered, std::move(ship)};
    progress(c);
  }

  void on_accept(HandlerContext& c, const Envelope& e) {
    int k;
    bool ok;
    decode(e.payload, k, ok);
    buf_[k].accept = ok ? 1 : 0;
    progress(c);
  }

  void on_shift(HandlerContext& c, const Envelope& e) {
    int k, from;
    Bytes deltas;
    decode(e.payload, k, from, deltas);
    if (k != k_ || !std::binary_search(nbrs_.begin(), nbrs_.end(), from))
      throw Error(ErrorCode::StaleTopology, "shift message from " + std::to_string(from) + " to " +
                                                std::to_string(sub.id) + " outside the current "
                                                "neighborhood");
    buf_[k].shift[from] = std::move(deltas);
    c.satisfy(evShift_, peers_[from]);
  }

  void on_shift_ready(HandlerContext& c, const Envelope& e) {
    int k;
    decode(e.payload, k);
    buf_[k].shiftFired = true;
    progress(c);
  }

  void on_holders(HandlerContext& c, const Envelope& e) {
    int k, from;
    Bytes h;
    decode(e.payload, k, from, h);
    buf_[k].holders[from] = std::move(h);
    c.satisfy(evHolders_, peers_[from]);
  }

  void on_holders_ready(HandlerContext& c, const Envelope& e) {
    int k;
    decode(e.payload, k);
    buf_[k].holdersFired = true;
    progress(c);
  }

  void on_verdict(HandlerContext& c, const Envelope& e) {
    int k, stop, role, receiver;
    std::vector<int> in;
    decode(e.payload, k, stop, role, receiver, in);
    if (k < k_ || stage_ == Stage::Done) return;  // a verdict nobody waited for
    auto& b = buf_[k];
    b.verdict = stop;
    b.planRole = role;
    b.planReceiver = receiver;
    b.planIn = std::move(in);
    progress(c);
  }

  Subdomain sub;

 private:
  const RunConfig& cfg() const { return sh_->cfg; }

  void send_all(HandlerContext& c, HandlerId h, const Bytes& payload) {
    for (int v : nbrs_) c.send(peers_[v], h, payload);
  }

  std::vector<MobilePointer> pointers(const std::vector<int>& ids) const {
    std::vector<MobilePointer> out;
    for (int v : ids) out.push_back(peers_[v]);
    return out;
  }

  Priority priority_of(int v) {
    auto count = v == sub.id ? myCount_ : buf_[k_].status[v].count;
    return make_priority(v, count, cfg().seed, k_);
  }

  void begin(HandlerContext& c, int k) {
    k_ = k;
    c.set_phase(label(k));
    nbrs_.assign(sub.neighbors.begin(), sub.neighbors.end());
    c.note("degree", "sub=" + std::to_string(sub.id) + ";obj=" + std::to_string(c.self().id) +
                         ";degree=" + std::to_string(nbrs_.size()));

    Report rep;
    rep.id = sub.id;
    {
      Timer t{c, "qualityCheck"};
      auto lq = count_low_quality(sub.mesh, sh_->field, cfg().quality);
      myCount_ = lq.total;
      myIfaceLow_ = lq.frozen;
      if (!sub.mesh.tets.empty()) {
        auto q = quality_report(sub.mesh, sh_->field, cfg().quality);
        rep.tets = q.tetCount;
        rep.edges = q.edgeCount;
        rep.edgesInBand = q.edgesInUnitBand;
        rep.minQ = q.minQ;
        rep.sumQ = q.meanQ * static_cast<double>(q.tetCount);
      }
    }
    rep.status = {myCount_, myIfaceLow_, wasReceiver_};
    rep.nbrs = nbrs_;
    rep.prevRole = prevRole_;
    rep.prevReceiver = prevReceiver_;
    rep.accepted = prevAccepted_;
    rep.rejected = prevRejected_;
    rep.overGathered = prevOver_;
    if (cfg().checkInvariants) {
      Timer t{c, "conversion"};
      rep.snapshot = tetshift::pack(sub);
    }
    c.send(master_, hReport, encode(k, rep));

    if (k > cfg().maxIterations) {
      finalize(c);
      return;
    }

    role_ = static_cast<int>(Role::Idle);
    receiver_ = -1;
    inNbrs_.clear();
    shipTets_.clear();
    shipment_.clear();
    offered_ = false;
    overGathered_ = false;
    shipHolders_.clear();
    accepted_.clear();
    rejected_ = 0;
    if (nbrs_.empty())
      buf_[k].shiftFired = true;
    else
      evShift_ = c.create_event(pointers(nbrs_), hShiftReady, encode(k));
    if (cfg().coloring == ColoringMode::Decentralized) {
      Timer t{c, "coloring"};
      send_all(c, hStatus, encode(k, sub.id, rep.status));
    }
    stage_ = Stage::WaitStatus;
  }

  void progress(HandlerContext& c) {
    while (step(c)) {
    }
  }

  bool step(HandlerContext& c) {
    switch (stage_) {
      case Stage::WaitStatus: return wait_status(c);
      case Stage::WaitVerdict: return wait_verdict(c);
      case Stage::Luby: return luby(c);
      case Stage::Roles: return roles(c);
      case Stage::WaitChoices: return wait_choices(c);
      case Stage::WaitAccept: return wait_accept(c);
      case Stage::WaitShift: return wait_shift(c);
      case Stage::WaitHolders: return wait_holders(c);
      case Stage::Idle:
      case Stage::Done: return false;
    }
    return false;
  }

  bool wait_status(HandlerContext& c) {
    auto& b = buf_[k_];
    if (cfg().coloring == ColoringMode::Centralized) {
      if (b.verdict < 0) return false;
      if (b.verdict == 1) {
        finalize(c);
        return false;
      }
      role_ = b.planRole;
      receiver_ = b.planReceiver;
      inNbrs_ = b.planIn;
      stage_ = Stage::Roles;
      return true;
    }
    for (int v : nbrs_)
      if (!b.status.count(v)) return false;
    bool quiet = myCount_ == 0;
    for (int v : nbrs_) quiet = quiet && b.status[v].count == 0;
    if (quiet) {
      stage_ = Stage::WaitVerdict;
      return true;
    }
    start_luby(c);
    return true;
  }

  bool wait_verdict(HandlerContext& c) {
    auto& b = buf_[k_];
    if (b.verdict < 0) return false;
    if (b.verdict == 1) {
      finalize(c);
      return false;
    }
    start_luby(c);
    return true;
  }

  void start_luby(HandlerContext& c) {
    Timer t{c, "coloring"};
    auto& b = buf_[k_];
    bool ifaceLow = false;
    for (int v : nbrs_) ifaceLow = ifaceLow || b.status[v].ifaceLow > 0;
    bool eligible = myCount_ > 0 && !(wasReceiver_ && ifaceLow);
    lubyState_ = static_cast<int>(eligible ? LubyState::Undecided : LubyState::Out);
    lubyRound_ = 0;
    send_all(c, hLuby, encode(k_, sub.id, 0, lubyState_));
    stage_ = Stage::Luby;
  }

  // State of neighbor v after round r, if known yet.
  static std::optional<LubyState> state_at(const std::map<int, int>& rounds, int r) {
    if (auto it = rounds.find(r); it != rounds.end()) return static_cast<LubyState>(it->second);
    auto it = rounds.lower_bound(r);
    if (it == rounds.begin()) return std::nullopt;
    --it;
    auto s = static_cast<LubyState>(it->second);
    if (s == LubyState::Undecided) return std::nullopt;
    return s;
  }

  bool luby(HandlerContext& c) {
    Timer t{c, "coloring"};
    auto& b = buf_[k_];
    if (static_cast<LubyState>(lubyState_) == LubyState::Undecided) {
      int r = lubyRound_ + 1;
      std::vector<std::pair<Priority, LubyState>> nb;
      for (int v : nbrs_) {
        auto s = state_at(b.luby[v], r - 1);
        if (!s) return false;
        nb.emplace_back(priority_of(v), *s);
      }
      lubyState_ = static_cast<int>(luby_decide(priority_of(sub.id), nb));
      lubyRound_ = r;
      send_all(c, hLuby, encode(k_, sub.id, r, lubyState_));
      return true;
    }
    std::vector<int> in;
    for (int v : nbrs_) {
      const auto& rounds = b.luby[v];
      if (rounds.empty()) return false;
      auto last = static_cast<LubyState>(rounds.rbegin()->second);
      if (last == LubyState::Undecided) return false;
      if (last == LubyState::In) in.push_back(v);
    }
    inNbrs_ = in;
    if (static_cast<LubyState>(lubyState_) == LubyState::In) {
      role_ = static_cast<int>(Role::Receiver);
    } else {
      int best = -1;
      for (int v : in)
        if (best < 0 || priority_of(v) > priority_of(best)) best = v;
      receiver_ = best;
      role_ = static_cast<int>(best >= 0 ? Role::Sender : Role::Idle);
    }
    stage_ = Stage::Roles;
    return true;
  }

  bool roles(HandlerContext& c) {
    if (role_ == static_cast<int>(Role::Sender)) {
      Timer t{c, "gather"};
      GatherOptions go;
      go.seeds = cfg().seeds;
      go.maxShipFraction = cfg().maxShipFraction;
      go.layers = sub.miiPassCount > 0 ? cfg().layersAdapted : cfg().layersFresh;
      // Halve the depth until the shipment fits; give up below one layer.
      for (;;) {
        try {
          shipTets_ = select_shipment(sub, receiver_, go);
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::OverGather) throw;
          shipTets_.clear();
          c.note("overgather", std::to_string(sub.id) + ">" + std::to_string(receiver_) + ":" +
                                   std::to_string(go.layers));
          if (go.layers == 1) {
            overGathered_ = true;
            break;
          }
          go.layers /= 2;
        }
      }
      if (!shipTets_.empty()) {
        Shipment s = build_shipment(sub, receiver_, shipTets_);
        for (const auto& sv : s.vertices)
          shipHolders_[sv.gid] = std::set<int>(sv.holders.begin(), sv.holders.end());
        shipment_ = tetshift::pack(s);
        offered_ = true;
      }
    }
    for (int v : inNbrs_) {
      bool mine = offered_ && v == receiver_;
      c.send(peers_[v], hChoice, encode(k_, sub.id, mine, mine ? shipment_ : Bytes{}));
    }
    if (role_ == static_cast<int>(Role::Receiver)) {
      stage_ = Stage::WaitChoices;
      return true;
    }
    if (offered_) {
      stage_ = Stage::WaitAccept;
      return true;
    }
    send_shift(c, {});
    stage_ = Stage::WaitShift;
    return true;
  }

  void send_shift(HandlerContext& c, const std::map<int, std::vector<HolderDelta>>& deltas) {
    for (int v : nbrs_) {
      auto it = deltas.find(v);
      Bytes d = it == deltas.end() ? pack_deltas({}) : pack_deltas(it->second);
      c.send(peers_[v], hShift, encode(k_, sub.id, d));
    }
  }

  bool wait_choices(HandlerContext& c) {
    auto& b = buf_[k_];
    for (int v : nbrs_)
      if (!b.choice.count(v)) return false;
    {
      Timer t{c, "scatter"};
      // Repeated passes in ascending sender order until nothing more fits:
      // an offer touching the receiver only at an edge or corner can become
      // acceptable once a face-adjacent neighbor's offer bridges it.
      std::vector<Shipment> taken;
      std::map<int, Shipment> pending;
      for (int v : nbrs_)
        if (b.choice[v].first) pending.emplace(v, unpack_shipment(b.choice[v].second));
      for (bool grew = true; grew;) {
        grew = false;
        for (auto it = pending.begin(); it != pending.end();) {
          taken.push_back(it->second);
          if (merge_keeps_connectivity(sub, taken)) {
            accepted_.push_back(it->first);
            it = pending.erase(it);
            grew = true;
          } else {
            taken.pop_back();
            ++it;
          }
        }
      }
      std::sort(accepted_.begin(), accepted_.end());
      for (int v : nbrs_) {
        if (!b.choice[v].first) continue;
        bool ok = std::binary_search(accepted_.begin(), accepted_.end(), v);
        if (!ok) {
          ++rejected_;
          c.note("reject", std::to_string(v) + ">" + std::to_string(sub.id));
        }
        c.send(peers_[v], hAccept, encode(k_, ok));
      }
    }
    if (!accepted_.empty()) evHolders_ = c.create_event(pointers(accepted_), hHoldersReady, encode(k_));
    send_shift(c, {});
    stage_ = Stage::WaitShift;
    return true;
  }

  bool wait_accept(HandlerContext& c) {
    auto& b = buf_[k_];
    if (b.accept < 0) return false;
    if (b.accept == 1) {
      Timer t{c, "topologyUpdate"};
      auto deltas = remove_shipped(sub, receiver_, shipTets_);
      auto idx = gid_index(sub.mesh);
      for (auto& [g, h] : shipHolders_) {
        h.insert(receiver_);
        if (!idx.count(g)) h.erase(sub.id);
      }
      send_shift(c, deltas);
    } else {
      shipTets_.clear();
      shipHolders_.clear();
      send_shift(c, {});
    }
    stage_ = Stage::WaitShift;
    return true;
  }

  bool wait_shift(HandlerContext& c) {
    auto& b = buf_[k_];
    if (!b.shiftFired) return false;
    bool shipped = role_ == static_cast<int>(Role::Sender) && b.accept == 1;
    {
      Timer t{c, "topologyUpdate"};
      for (int v : nbrs_) {
        auto deltas = unpack_deltas(b.shift[v]);
        apply_deltas(sub, deltas);
        if (shipped) apply_deltas(shipHolders_, deltas);
      }
      sub.rebuild_neighbors();
      classify_interface(sub);
      if (shipped) {
        std::map<GlobalId, std::vector<int>> h;
        for (const auto& [g, s] : shipHolders_) h[g] = std::vector<int>(s.begin(), s.end());
        c.send(peers_[receiver_], hHolders, encode(k_, sub.id, encode(h)));
      }
    }
    if (role_ == static_cast<int>(Role::Receiver) && !accepted_.empty()) {
      stage_ = Stage::WaitHolders;
      return true;
    }
    finish_iteration(c);
    return true;
  }

  bool wait_holders(HandlerContext& c) {
    auto& b = buf_[k_];
    if (!b.holdersFired) return false;
    {
      Timer t{c, "scatter"};
      for (int v : accepted_) {
        Shipment s = unpack_shipment(b.choice[v].second);
        std::map<GlobalId, std::vector<int>> h;
        decode(b.holders[v], h);
        for (auto& sv : s.vertices) {
          auto it = h.find(sv.gid);
          if (it == h.end())
            throw Error(ErrorCode::ConformityBreak,
                        "receiver " + std::to_string(sub.id) + ", sender " + std::to_string(v) +
                            ": no holder list for gid (" + std::to_string(sv.gid.owner) + "," +
                            std::to_string(sv.gid.local) + ")");
          sv.holders = it->second;
        }
        try {
          merge_scatter(sub, s);
        } catch (const Error& e) {
          throw Error(e.code(), "receiver " + std::to_string(sub.id) + ", sender " +
                                    std::to_string(v) + ": " + e.what());
        }
      }
    }
    {
      Timer t{c, "adaptation"};
      auto kc = cfg().kernel;
      kc.phase = kernel::AdaptConfig::Phase::MII;
      kc.seed = kernel_seed(cfg().seed, sub.id, k_);
      kernel::adapt(sub, sh_->field, kc, cfg().threads);
      ++sub.miiPassCount;
      ++sub.state.miiRound;
      sub.state.phase = SubdomainState::Phase::MIIAdapted;
    }
    finish_iteration(c);
    return true;
  }

  void finish_iteration(HandlerContext& c) {
    prevRole_ = role_;
    prevReceiver_ = receiver_;
    wasReceiver_ = role_ == static_cast<int>(Role::Receiver);
    prevAccepted_ = static_cast<int>(accepted_.size());
    prevRejected_ = rejected_;
    prevOver_ = overGathered_;
    buf_.erase(k_);
    begin(c, k_ + 1);
  }

  void finalize(HandlerContext& c) {
    stage_ = Stage::Done;
    c.set_phase("final");
    {
      Timer t{c, "adaptation"};
      auto kc = cfg().kernel;
      for (auto phase : {kernel::AdaptConfig::Phase::FinalCollapse,
                         kernel::AdaptConfig::Phase::QualityImprovement}) {
        kc.phase = phase;
        kc.seed = kernel_seed(cfg().seed, sub.id, -1);
        kernel::adapt(sub, sh_->field, kc, cfg().threads);
      }
    }
    Bytes snap;
    if (cfg().checkInvariants) {
      Timer t{c, "conversion"};
      snap = tetshift::pack(sub);
    }
    c.send(master_, hDone, encode(sub.id, prevRole_, prevReceiver_, snap));
    buf_.clear();
  }

  std::shared_ptr<const Shared> sh_;
  std::vector<MobilePointer> peers_;
  MobilePointer master_;
  int k_ = 0;
  Stage stage_ = Stage::Idle;
  std::vector<int> nbrs_;
  std::int64_t myCount_ = 0;
  std::int64_t myIfaceLow_ = 0;
  bool wasReceiver_ = false;
  int prevRole_ = 0;
  int prevReceiver_ = -1;
  int prevAccepted_ = 0;
  int prevRejected_ = 0;
  bool prevOver_ = false;
  int lubyState_ = 0;
  int lubyRound_ = 0;
  int role_ = 0;
  int receiver_ = -1;
  std::vector<int> inNbrs_;
  std::vector<int> shipTets_;
  Bytes shipment_;
  bool offered_ = false;
  bool overGathered_ = false;
  std::map<GlobalId, std::set<int>> shipHolders_;
  std::vector<int> accepted_;
  int rejected_ = 0;
  EventId evShift_;
  EventId evHolders_;
  std::map<int, IterBuf> buf_;
};

// Collects reports, decides convergence, plans centrally when asked to and
// runs the invariant suite on snapshots. Addressed point to point like any
// other object.
class MasterActor final : public MobileObject {
 public:
  explicit MasterActor(std::shared_ptr<const Shared> sh) : sh_(std::move(sh)) {}

  std::string type_name() const override { return "master"; }

  Bytes pack() const override {
    Writer a;
    const_cast<MasterActor*>(this)->visit(a);
    return a.w.take();
  }

  static std::unique_ptr<MobileObject> unpack(std::shared_ptr<const Shared> sh,
                                              std::span<const std::uint8_t> b) {
    auto m = std::make_unique<MasterActor>(std::move(sh));
    Reader a(b);
    m->visit(a);
    return m;
  }

  template <class A>
  void visit(A& a) {
    a(peers, reports_, finals_, done, converged, iterations, log, plans, graphs, violations);
  }

  void on_start(HandlerContext& c, const Envelope& e) {
    decode(e.payload, peers);
    c.set_phase("init");
  }

  void on_report(HandlerContext& c, const Envelope& e) {
    int k;
    Report r;
    decode(e.payload, k, r);
    auto& got = reports_[k];
    got[r.id] = std::move(r);
    if (static_cast<int>(got.size()) == sh_->n) process(c, k);
  }

  void on_done(HandlerContext& c, const Envelope& e) {
    int id, role, receiver;
    Bytes snap;
    decode(e.payload, id, role, receiver, snap);
    (void)c;
    finals_[id] = std::move(snap);
    ++done;
    if (done == sh_->n && sh_->cfg.checkInvariants) check_snapshots("final", finals_);
  }

  std::vector<MobilePointer> peers;
  int done = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<IterationLog> log;
  std::map<int, ShiftPlan> plans;
  std::map<int, std::vector<std::set<int>>> graphs;
  std::vector<std::string> violations;

 private:
  void check_snapshots(const std::string& when, const std::map<int, Bytes>& snaps) {
    std::vector<Subdomain> subs;
    for (const auto& [id, b] : snaps) subs.push_back(tetshift::unpack(b));
    auto rep = check_global_invariants(subs, sh_->volume);
    for (auto& v : rep.violations) violations.push_back(when + ": " + v);
  }

  void process(HandlerContext& c, int k) {
    c.set_phase(label(k));
    const auto& got = reports_[k];
    const int n = sh_->n;
    const auto& cfg = sh_->cfg;

    IterationLog entry;
    entry.iteration = k - 1;
    entry.minQ = 1.0;
    double sumQ = 0.0;
    std::vector<std::set<int>> graph(n);
    std::vector<std::int64_t> counts(n, 0);
    for (const auto& [id, r] : got) {
      entry.tets += r.tets;
      entry.lowQuality += r.status.count;
      entry.lowQualityFrozen += r.status.ifaceLow;
      entry.edges += r.edges;
      entry.edgesInBand += r.edgesInBand;
      if (r.tets > 0) entry.minQ = std::min(entry.minQ, r.minQ);
      sumQ += r.sumQ;
      graph[id] = std::set<int>(r.nbrs.begin(), r.nbrs.end());
      counts[id] = r.status.count;
    }
    entry.meanQ = entry.tets ? sumQ / static_cast<double>(entry.tets) : 0.0;
    graphs[k] = graph;

    if (k > 1) {
      ShiftPlan plan;
      plan.layersFresh = cfg.layersFresh;
      plan.layersAdapted = cfg.layersAdapted;
      plan.seedConnectivity = cfg.seeds;
      for (const auto& [id, r] : got) {
        if (r.prevRole == static_cast<int>(Role::Receiver)) {
          plan.receivers.insert(id);
          plan.senders[id];
        }
        entry.shipments += r.accepted;
        entry.rejected += r.rejected;
        entry.overGathered += r.overGathered ? 1 : 0;
      }
      for (const auto& [id, r] : got)
        if (r.prevRole == static_cast<int>(Role::Sender)) plan.senders[r.prevReceiver].insert(id);
      entry.receivers = static_cast<int>(plan.receivers.size());
      const auto& before = graphs.at(k - 1);
      if (!is_independent(before, plan.receivers))
        violations.push_back(label(k - 1) + ": receivers are not independent");
      for (const auto& [r, ss] : plan.senders)
        for (int s : ss)
          if (!before[r].count(s))
            violations.push_back(label(k - 1) + ": sender " + std::to_string(s) +
                                 " is not a neighbor of receiver " + std::to_string(r));
      plans[k - 1] = std::move(plan);
    }
    log.push_back(entry);

    if (cfg.checkInvariants) {
      std::map<int, Bytes> snaps;
      for (const auto& [id, r] : got) snaps[id] = r.snapshot;
      check_snapshots(label(k - 1), snaps);
    }

    bool quiet = entry.lowQuality == 0;
    if (k > cfg.maxIterations) {
      converged = quiet;
      iterations = k - 1;
    } else if (quiet) {
      converged = true;
      iterations = k - 1;
      for (int i = 0; i < n; ++i) c.send(peers[i], hVerdict, encode(k, 1, 0, -1, std::vector<int>{}));
    } else if (cfg.coloring == ColoringMode::Decentralized) {
      for (int i = 0; i < n; ++i) c.send(peers[i], hVerdict, encode(k, 0, 0, -1, std::vector<int>{}));
    } else {
      std::vector<bool> eligible(n, true);
      for (const auto& [id, r] : got) {
        bool ifaceLow = false;
        for (int v : r.nbrs) ifaceLow = ifaceLow || got.at(v).status.ifaceLow > 0;
        eligible[id] = !(r.status.wasReceiver && ifaceLow);
      }
      std::unique_ptr<bool[]> raw(new bool[n]);
      for (int i = 0; i < n; ++i) raw[i] = eligible[i];
      auto plan = color_receivers(graph, counts, cfg.seed, k, std::span<const bool>(raw.get(), n));
      for (int i = 0; i < n; ++i) {
        int role = plan.receivers.count(i) ? static_cast<int>(Role::Receiver) : 0;
        int recv = plan.receiver_of(i);
        if (recv >= 0) role = static_cast<int>(Role::Sender);
        std::vector<int> in;
        for (int v : graph[i])
          if (plan.receivers.count(v)) in.push_back(v);
        c.send(peers[i], hVerdict, encode(k, 0, role, recv, in));
      }
    }
    reports_.erase(k);
  }

  std::shared_ptr<const Shared> sh_;
  std::map<int, std::map<int, Report>> reports_;
  std::map<int, Bytes> finals_;
};

template <class F>
runtime::Handler on(F f) {
  return [f](HandlerContext& c, const Envelope& e) { (c.as<SubdomainActor>().*f)(c, e); };
}

}  // namespace

void RunConfig::validate() const {
  auto bad = [](const std::string& s) { throw Error(ErrorCode::InvalidArgument, s); };
  if (subdomains < 1) bad("subdomains must be >= 1");
  if (contexts < 1) bad("contexts must be >= 1");
  if (threads < 1) bad("threads must be >= 1");
  if (handlerWorkers < 1) bad("handler workers must be >= 1");
  if (layersFresh < 1 || layersAdapted < 1) bad("layers must be >= 1");
  if (maxIterations < 0) bad("iterations must be >= 0");
  if (!(maxShipFraction > 0.0 && maxShipFraction <= 1.0)) bad("ship fraction must lie in (0, 1]");
  kernel.validate();
}

int RunResult::exit_code() const {
  if (!violations.empty()) return 3;
  return converged ? 0 : 2;
}

RunResult run_distributed(const TetMesh& input, const MetricField& field, const RunConfig& cfg) {
  cfg.validate();
  auto t0 = Clock::now();
  auto plan = DecompositionPlan::parse(cfg.subdomains, cfg.axisOrder, cfg.splits);
  auto subs = decompose(input, plan);

  auto sh = std::make_shared<Shared>();
  sh->cfg = cfg;
  sh->field = field;
  sh->volume = input.total_volume();
  sh->n = static_cast<int>(subs.size());
  std::shared_ptr<const Shared> shared = sh;

  runtime::RuntimeOptions ro;
  ro.contexts = cfg.contexts;
  ro.handlerWorkers = cfg.handlerWorkers;
  ro.balance = cfg.balance;
  ro.audit = cfg.audit;
  runtime::Runtime rt(ro);
  rt.register_type("subdomain", [shared](std::span<const std::uint8_t> b) {
    return SubdomainActor::unpack(shared, b);
  });
  rt.register_type("master", [shared](std::span<const std::uint8_t> b) {
    return MasterActor::unpack(shared, b);
  });
  rt.register_handler(hStart, "start", [](HandlerContext& c, const Envelope& e) {
    if (auto* m = dynamic_cast<MasterActor*>(&c.object()))
      m->on_start(c, e);
    else
      c.as<SubdomainActor>().on_start(c, e);
  });
  rt.register_handler(hStatus, "status", on(&SubdomainActor::on_status));
  rt.register_handler(hLuby, "luby", on(&SubdomainActor::on_luby));
  rt.register_handler(hChoice, "choice", on(&SubdomainActor::on_choice));
  rt.register_handler(hAccept, "accept", on(&SubdomainActor::on_accept));
  rt.register_handler(hShift, "shift", on(&SubdomainActor::on_shift));
  rt.register_handler(hShiftReady, "shift-ready", on(&SubdomainActor::on_shift_ready));
  rt.register_handler(hHolders, "holders", on(&SubdomainActor::on_holders));
  rt.register_handler(hHoldersReady, "holders-ready", on(&SubdomainActor::on_holders_ready));
  rt.register_handler(hVerdict, "verdict", on(&SubdomainActor::on_verdict));
  rt.register_handler(hReport, "report", [](HandlerContext& c, const Envelope& e) {
    c.as<MasterActor>().on_report(c, e);
  });
  rt.register_handler(hDone, "done", [](HandlerContext& c, const Envelope& e) {
    c.as<MasterActor>().on_done(c, e);
  });

  auto master = rt.register_object(std::make_unique<MasterActor>(shared), 0);
  std::vector<MobilePointer> peers;
  for (auto& s : subs) {
    int ctx = s.id % cfg.contexts;
    peers.push_back(rt.register_object(std::make_unique<SubdomainActor>(shared, std::move(s)), ctx));
  }
  rt.invoke(master, hStart, encode(peers));
  for (auto p : peers) rt.invoke(p, hStart, encode(peers, master));
  rt.run();

  RunResult res;
  for (auto p : peers) res.subdomains.push_back(rt.object_as<SubdomainActor>(p).sub);
  auto& m = rt.object_as<MasterActor>(master);
  if (m.done != sh->n) throw Error(ErrorCode::InvalidArgument, "run ended before every subdomain finished");
  res.converged = m.converged;
  res.iterations = m.iterations;
  res.log = m.log;
  res.plans = m.plans;
  res.graphs = m.graphs;
  res.violations = m.violations;
  res.mesh = assemble(res.subdomains);
  res.audit = rt.message_audit();
  if (cfg.audit) res.auditLog = rt.audit_log();

  auto times = rt.phase_times();
  double capacity = rt.wall_seconds() * cfg.handlerWorkers;
  for (int c = 0; c < static_cast<int>(times.size()); ++c) {
    double attributed = 0.0;
    for (const char* p : kPhaseNames)
      if (std::string(p) != "misc") attributed += times[c][p];
    double total = std::max(capacity, attributed);
    for (const char* p : kPhaseNames) {
      double s = std::string(p) == "misc" ? total - attributed : times[c][p];
      res.phases.push_back({c, p, s, total > 0 ? s / total : 0.0});
    }
  }
  res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return res;
}

void write_phase_report(std::ostream& os, const std::vector<PhaseRow>& rows) {
  os << "context,phase,seconds,fraction\n";
  for (const auto& r : rows) os << r.context << "," << r.phase << "," << r.seconds << "," << r.fraction << "\n";
}

void write_convergence_log(std::ostream& os, const std::vector<IterationLog>& log) {
  os << "iteration,tets,low_quality,low_quality_frozen,min_q,mean_q,edges,edges_in_band,"
        "receivers,shipments,rejected,over_gathered\n";
  for (const auto& l : log)
    os << l.iteration << "," << l.tets << "," << l.lowQuality << "," << l.lowQualityFrozen << ","
       << l.minQ << "," << l.meanQ << "," << l.edges << "," << l.edgesInBand << "," << l.receivers
       << "," << l.shipments << "," << l.rejected << "," << l.overGathered << "\n";
}

}  // namespace tetshift::orch
