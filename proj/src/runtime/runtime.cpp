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

#include "tetshift/runtime/runtime.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "tetshift/error.hpp"

namespace tetshift::runtime {

namespace {

constexpr HandlerId kSystem = 0xFFFF0000u;
// Object-level system messages travel through the reorder buffer like user
// messages; the rest are addressed to a context.
constexpr HandlerId kSatisfy = kSystem + 1;
constexpr HandlerId kCreateEvent = kSystem + 2;
constexpr HandlerId kMigrate = kSystem + 3;
constexpr HandlerId kBundle = kSystem + 4;
constexpr HandlerId kLocation = kSystem + 5;
constexpr HandlerId kSteal = kSystem + 6;
constexpr HandlerId kStealDone = kSystem + 7;

bool object_level(HandlerId h) { return h < kSystem || h == kSatisfy || h == kCreateEvent; }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_envelope(ByteWriter& w, const Envelope& e) { w.bytes(e.pack()); }
Envelope read_envelope(ByteReader& r) { return Envelope::unpack(r.bytes()); }

}  // namespace

std::string to_string(MobilePointer p) {
  std::ostringstream os;
  os << "obj" << p.home() << "." << (p.id & 0xffffffffULL);
  return os.str();
}

Bytes Envelope::pack() const {
  ByteWriter w;
  w.u64(handler);
  w.u64(target.id);
  w.u64(from.id);
  w.i64(sender);
  w.u64(seq);
  w.i64(load);
  w.str(phase);
  w.bytes(payload);
  return w.take();
}

Envelope Envelope::unpack(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Envelope e;
  auto h = r.u64();
  if (h > 0xffffffffULL) throw Error(ErrorCode::MalformedBuffer, "handler id out of range");
  e.handler = static_cast<HandlerId>(h);
  e.target.id = r.u64();
  e.from.id = r.u64();
  e.sender = static_cast<int>(r.i64());
  e.seq = r.u64();
  e.load = r.i64();
  e.phase = r.str();
  e.payload = r.bytes();
  if (!r.done()) throw Error(ErrorCode::MalformedBuffer, "trailing bytes after envelope");
  return e;
}

std::int64_t MessageAudit::total_sent() const {
  std::int64_t s = 0;
  for (const auto& c : contexts) s += c.p2pSent;
  return s;
}

std::int64_t MessageAudit::total_received() const {
  std::int64_t s = 0;
  for (const auto& c : contexts) s += c.p2pReceived;
  return s;
}

struct EventRec {
  std::set<ObjectId> deps;
  std::set<ObjectId> satisfied;
  HandlerId action = 0;
  Bytes payload;
};

struct Slot {
  std::unique_ptr<MobileObject> obj;
  std::deque<Envelope> ready;
  // Reorder buffer: next expected seq per sending context.
  std::map<int, std::uint64_t> expected;
  std::map<std::pair<int, std::uint64_t>, Envelope> held;
  // Touched only by the job running on this object.
  std::map<std::uint64_t, EventRec> events;
  std::set<std::uint64_t> retired;
  std::uint64_t nextEvent = 1;
  std::string phase;
  std::uint64_t moves = 0;
  bool running = false;
  bool queued = false;
  int migrateTo = -1;
};

struct Outgoing {
  MobilePointer target;
  HandlerId handler;
  Bytes payload;
  std::string phase;  // sender's label when the send was issued
};

struct Job {
  ObjectId id = 0;
  Slot* slot = nullptr;
  Envelope env;
  std::vector<Outgoing> out;
  std::vector<std::array<std::string, 3>> notes;  // phase, event, detail
  std::map<std::string, double> times;
};

struct Ctx {
  std::mutex mu;
  std::condition_variable workCv;
  std::map<ObjectId, std::unique_ptr<Slot>> objects;
  // Home entries: object -> (location, move count of that report).
  std::map<ObjectId, std::pair<int, std::uint64_t>> directory;
  std::map<ObjectId, int> forward;
  std::map<ObjectId, std::uint64_t> nextSeq;
  std::deque<ObjectId> runnable;
  std::map<int, std::int64_t> peerLoad;
  bool stealPending = false;
  ContextAudit audit;
  std::map<std::string, double> times;
  std::uint32_t nextSerial = 0;

  // Inbound channels, one FIFO per source (index 0 is the driver).
  std::mutex inMu;
  std::condition_variable inCv;
  std::vector<std::deque<Bytes>> inbox;
  std::size_t rr = 0;
};

struct HandlerEntry {
  std::string name;
  Handler fn;
};

struct Runtime::Impl {
  RuntimeOptions opt;
  std::vector<std::unique_ptr<Ctx>> ctx;
  std::map<HandlerId, HandlerEntry> handlers;
  std::map<std::string, Factory> factories;

  std::atomic<std::int64_t> inflight{0};
  std::atomic<bool> stop{false};
  std::mutex doneMu;
  std::condition_variable doneCv;
  std::mutex errMu;
  std::exception_ptr error;

  std::mutex auditMu;
  std::vector<std::string> log;
  std::map<std::pair<ObjectId, std::string>, std::set<ObjectId>> fanout;

  // Driver-side sequencing and accounting.
  std::map<ObjectId, std::uint64_t> driverSeq;
  std::uint64_t driverEvents = 0;
  std::int64_t driverSent = 0;
  double wall = 0.0;

  explicit Impl(RuntimeOptions o) : opt(o) {
    if (opt.contexts < 1) throw Error(ErrorCode::InvalidArgument, "contexts must be >= 1");
    if (opt.handlerWorkers < 1)
      throw Error(ErrorCode::InvalidArgument, "handler workers must be >= 1");
    for (int i = 0; i < opt.contexts; ++i) {
      auto c = std::make_unique<Ctx>();
      c->inbox.resize(static_cast<std::size_t>(opt.contexts) + 1);
      ctx.push_back(std::move(c));
    }
  }

  int n() const { return opt.contexts; }

  const std::string& handler_name(HandlerId h) const {
    static const std::string sys = "system";
    auto it = handlers.find(h);
    return it == handlers.end() ? sys : it->second.name;
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lk(errMu);
      if (!error) error = e;
    }
    stop = true;
    for (auto& c : ctx) {
      c->workCv.notify_all();
      c->inCv.notify_all();
    }
    doneCv.notify_all();
  }

  void consumed() {
    if (--inflight == 0) {
      std::lock_guard lk(doneMu);
      doneCv.notify_all();
    }
  }

  void add_log(std::string line) {
    if (!opt.audit) return;
    std::lock_guard lk(auditMu);
    log.push_back(std::move(line));
  }

  // Caller holds src's lock when src >= 0.
  void emit(int src, int dst, Envelope e) {
    if (src >= 0) e.load = static_cast<std::int64_t>(ctx[src]->runnable.size());
    auto t0 = Clock::now();
    Bytes b = e.pack();
    if (src >= 0) ctx[src]->times["conversion"] += seconds_since(t0);
    ++inflight;
    auto& d = *ctx[dst];
    {
      std::lock_guard lk(d.inMu);
      d.inbox[static_cast<std::size_t>(src + 1)].push_back(std::move(b));
    }
    d.inCv.notify_one();
  }

  // Where c should send a message for id. Caller holds c's lock.
  int route(int c, ObjectId id) {
    auto& cx = *ctx[c];
    if (cx.objects.count(id)) return c;
    if (auto it = cx.forward.find(id); it != cx.forward.end()) return it->second;
    MobilePointer p{id};
    int home = p.home();
    if (home < 0 || home >= n())
      throw Error(ErrorCode::UnknownObject, "no home context for " + to_string(p));
    if (home == c) {
      auto it = cx.directory.find(id);
      if (it == cx.directory.end())
        throw Error(ErrorCode::UnknownObject, to_string(p) + " was never registered");
      return it->second.first;
    }
    return home;
  }

  void mark_runnable(Ctx& cx, ObjectId id, Slot& s) {
    if (s.running || s.queued || s.ready.empty()) return;
    s.queued = true;
    cx.runnable.push_back(id);
    cx.workCv.notify_one();
  }

  // Caller holds c's lock; the slot is idle.
  void do_migrate(int c, ObjectId id, int dest) {
    auto& cx = *ctx[c];
    auto node = cx.objects.extract(id);
    Slot& s = *node.mapped();
    auto t0 = Clock::now();
    ByteWriter w;
    w.u64(s.moves + 1);
    w.str(s.obj->type_name());
    w.bytes(s.obj->pack());
    w.u64(s.expected.size());
    for (auto [k, v] : s.expected) {
      w.i64(k);
      w.u64(v);
    }
    w.u64(s.held.size());
    for (const auto& [k, e] : s.held) write_envelope(w, e);
    w.u64(s.ready.size());
    for (const auto& e : s.ready) write_envelope(w, e);
    w.u64(s.events.size());
    for (const auto& [serial, ev] : s.events) {
      w.u64(serial);
      w.u64(ev.deps.size());
      for (auto d : ev.deps) w.u64(d);
      w.u64(ev.satisfied.size());
      for (auto d : ev.satisfied) w.u64(d);
      w.u64(ev.action);
      w.bytes(ev.payload);
    }
    w.u64(s.retired.size());
    for (auto r : s.retired) w.u64(r);
    w.u64(s.nextEvent);
    w.str(s.phase);
    cx.times["conversion"] += seconds_since(t0);

    cx.forward[id] = dest;
    if (MobilePointer{id}.home() == c) cx.directory[id] = {dest, s.moves + 1};
    ++cx.audit.migrationsOut;
    add_log(s.phase + "," + std::to_string(c) + ",migrate," + to_string(MobilePointer{id}) + ">" +
            std::to_string(dest));
    Envelope e;
    e.handler = kBundle;
    e.target.id = id;
    e.sender = c;
    e.payload = w.take();
    emit(c, dest, std::move(e));
  }

  // Caller holds c's lock.
  void install(int c, ObjectId id, std::span<const std::uint8_t> bundle) {
    auto& cx = *ctx[c];
    auto t0 = Clock::now();
    ByteReader r(bundle);
    auto s = std::make_unique<Slot>();
    s->moves = r.u64();
    auto type = r.str();
    auto fit = factories.find(type);
    if (fit == factories.end())
      throw Error(ErrorCode::InvalidArgument, "no factory registered for type " + type);
    s->obj = fit->second(r.bytes());
    for (auto k = r.count(16); k > 0; --k) {
      int sender = static_cast<int>(r.i64());
      s->expected[sender] = r.u64();
    }
    for (auto k = r.count(8); k > 0; --k) {
      auto e = read_envelope(r);
      s->held.emplace(std::make_pair(e.sender, e.seq), std::move(e));
    }
    for (auto k = r.count(8); k > 0; --k) s->ready.push_back(read_envelope(r));
    for (auto k = r.count(8); k > 0; --k) {
      auto serial = r.u64();
      EventRec ev;
      for (auto m = r.count(8); m > 0; --m) ev.deps.insert(r.u64());
      for (auto m = r.count(8); m > 0; --m) ev.satisfied.insert(r.u64());
      ev.action = static_cast<HandlerId>(r.u64());
      ev.payload = r.bytes();
      s->events.emplace(serial, std::move(ev));
    }
    for (auto k = r.count(8); k > 0; --k) s->retired.insert(r.u64());
    s->nextEvent = r.u64();
    s->phase = r.str();
    cx.times["conversion"] += seconds_since(t0);

    cx.forward.erase(id);
    int home = MobilePointer{id}.home();
    if (home == c) {
      auto& d = cx.directory[id];
      if (s->moves >= d.second) d = {c, s->moves};
    } else {
      ByteWriter w;
      w.i64(c);
      w.u64(s->moves);
      Envelope loc;
      loc.handler = kLocation;
      loc.target.id = id;
      loc.sender = c;
      loc.payload = w.take();
      emit(c, home, std::move(loc));
    }
    ++cx.audit.migrationsIn;
    Slot& ref = *s;
    cx.objects[id] = std::move(s);
    mark_runnable(cx, id, ref);
  }

  // Accepts an object-level envelope into a local slot in seq order.
  // Caller holds c's lock.
  void accept(Ctx& cx, ObjectId id, Slot& s, Envelope e) {
    auto& next = s.expected[e.sender];
    if (e.seq < next) {
      consumed();  // duplicate; never produced by the runtime itself
      return;
    }
    ++cx.audit.p2pReceived;
    if (e.seq > next) {
      auto key = std::make_pair(e.sender, e.seq);
      s.held.emplace(key, std::move(e));
      return;
    }
    int sender = e.sender;
    s.ready.push_back(std::move(e));
    ++next;
    for (auto it = s.held.find({sender, next}); it != s.held.end();
         it = s.held.find({sender, next})) {
      s.ready.push_back(std::move(it->second));
      s.held.erase(it);
      ++next;
    }
    mark_runnable(cx, id, s);
  }

  // Pump side: one envelope arriving at context c.
  void on_bytes(int c, const Bytes& bytes) {
    auto& cx = *ctx[c];
    auto t0 = Clock::now();
    Envelope e = Envelope::unpack(bytes);
    double dt = seconds_since(t0);
    std::lock_guard lk(cx.mu);
    cx.times["conversion"] += dt;
    if (e.sender >= 0 && e.sender != c) cx.peerLoad[e.sender] = e.load;
    ObjectId id = e.target.id;

    if (object_level(e.handler)) {
      if (auto it = cx.objects.find(id); it != cx.objects.end()) {
        accept(cx, id, *it->second, std::move(e));
        return;
      }
      int dest = route(c, id);
      ++cx.audit.forwarded;
      emit(c, dest, std::move(e));
      consumed();
      return;
    }

    switch (e.handler) {
      case kMigrate: {
        ByteReader r(e.payload);
        int dest = static_cast<int>(r.i64());
        if (dest < 0 || dest >= n())
          throw Error(ErrorCode::InvalidArgument, "migration to unknown context");
        if (auto it = cx.objects.find(id); it != cx.objects.end()) {
          Slot& s = *it->second;
          if (dest != c) {
            if (s.running)
              s.migrateTo = dest;
            else
              do_migrate(c, id, dest);
          }
        } else {
          ++cx.audit.forwarded;
          emit(c, route(c, id), std::move(e));
        }
        break;
      }
      case kBundle:
        install(c, id, e.payload);
        break;
      case kLocation: {
        ByteReader r(e.payload);
        int where = static_cast<int>(r.i64());
        auto moves = r.u64();
        auto& d = cx.directory[id];
        if (moves >= d.second) d = {where, moves};
        break;
      }
      case kSteal: {
        ByteReader r(e.payload);
        int requester = static_cast<int>(r.i64());
        bool moved = false;
        if (cx.runnable.size() >= 2) {
          for (auto rit = cx.runnable.rbegin(); rit != cx.runnable.rend(); ++rit) {
            auto it = cx.objects.find(*rit);
            if (it == cx.objects.end() || it->second->running) continue;
            ObjectId victim = *rit;
            cx.runnable.erase(std::next(rit).base());
            it->second->queued = false;
            do_migrate(c, victim, requester);
            moved = true;
            break;
          }
        }
        Envelope done;
        done.handler = kStealDone;
        done.sender = c;
        done.payload = Bytes{static_cast<std::uint8_t>(moved)};
        emit(c, requester, std::move(done));
        break;
      }
      case kStealDone:
        cx.stealPending = false;
        cx.workCv.notify_all();
        break;
      default:
        throw Error(ErrorCode::InvalidArgument, "unknown system message");
    }
    consumed();
  }

  // Takes the next job on c, or returns false. Caller holds c's lock.
  bool take_job(Ctx& cx, Job& job) {
    while (!cx.runnable.empty()) {
      ObjectId id = cx.runnable.front();
      cx.runnable.pop_front();
      auto it = cx.objects.find(id);
      if (it == cx.objects.end()) continue;
      Slot& s = *it->second;
      s.queued = false;
      if (s.running || s.ready.empty()) continue;
      s.running = true;
      job.id = id;
      job.slot = &s;
      job.env = std::move(s.ready.front());
      s.ready.pop_front();
      return true;
    }
    return false;
  }

  void dispatch(HandlerContext& hc, Job& job, const Envelope& e) {
    auto it = handlers.find(e.handler);
    if (it == handlers.end())
      throw Error(ErrorCode::InvalidArgument, "handler " + std::to_string(e.handler) +
                                                  " is not registered");
    it->second.fn(hc, e);
    (void)job;
  }

  void execute(int c, Job& job) {
    HandlerContext hc(*owner, job, c);
    Slot& s = *job.slot;
    const Envelope& e = job.env;
    if (e.handler == kCreateEvent) {
      ByteReader r(e.payload);
      auto serial = r.u64();
      EventRec ev;
      for (auto k = r.count(8); k > 0; --k) ev.deps.insert(r.u64());
      ev.action = static_cast<HandlerId>(r.u64());
      ev.payload = r.bytes();
      s.events.emplace(serial, std::move(ev));
    } else if (e.handler == kSatisfy) {
      ByteReader r(e.payload);
      auto serial = r.u64();
      ObjectId dep = r.u64();
      auto it = s.events.find(serial);
      if (it == s.events.end()) {
        if (s.retired.count(serial)) return;  // late duplicate after firing
        throw Error(ErrorCode::UnknownEvent, "event " + std::to_string(serial) + " on " +
                                                 to_string(MobilePointer{job.id}));
      }
      auto& ev = it->second;
      if (!ev.deps.count(dep))
        throw Error(ErrorCode::InvalidArgument,
                    to_string(MobilePointer{dep}) + " is not a dependency of the event");
      ev.satisfied.insert(dep);
      if (ev.satisfied.size() == ev.deps.size()) {
        EventRec fired = std::move(ev);
        s.events.erase(it);
        s.retired.insert(serial);
        Envelope action;
        action.handler = fired.action;
        action.target.id = job.id;
        action.from.id = job.id;
        action.sender = c;
        action.payload = std::move(fired.payload);
        dispatch(hc, job, action);
      }
    } else {
      dispatch(hc, job, e);
    }
  }

  void finish(int c, Job& job) {
    auto& cx = *ctx[c];
    {
      std::lock_guard lk(cx.mu);
      Slot& s = *job.slot;
      for (auto& o : job.out) {
        Envelope e;
        e.handler = o.handler;
        e.target = o.target;
        e.from.id = job.id;
        e.sender = c;
        e.seq = cx.nextSeq[o.target.id]++;
        e.phase = o.phase;
        e.payload = std::move(o.payload);
        ++cx.audit.p2pSent;
        if (opt.audit) {
          std::lock_guard alk(auditMu);
          if (o.target.id != job.id) fanout[{job.id, o.phase}].insert(o.target.id);
          log.push_back(o.phase + "," + std::to_string(c) + ",send," +
                        to_string(MobilePointer{job.id}) + ">" + to_string(o.target) + ":" +
                        handler_name(o.handler) + ":" + std::to_string(e.payload.size()));
        }
        emit(c, route(c, o.target.id), std::move(e));
      }
      for (auto& [phase, ev, detail] : job.notes)
        add_log(phase + "," + std::to_string(c) + "," + ev + "," + detail);
      for (auto& [k, v] : job.times) cx.times[k] += v;
      s.running = false;
      if (s.migrateTo >= 0) {
        int dest = s.migrateTo;
        s.migrateTo = -1;
        s.queued = false;
        do_migrate(c, job.id, dest);
      } else {
        mark_runnable(cx, job.id, s);
      }
    }
    consumed();
  }

  void run_one(int c, Job& job) {
    try {
      execute(c, job);
    } catch (...) {
      std::lock_guard lk(ctx[c]->mu);
      job.slot->running = false;
      job.out.clear();
      fail(std::current_exception());
      return;
    }
    finish(c, job);
  }

  // Threaded mode -----------------------------------------------------------

  void pump_loop(int c) {
    auto& cx = *ctx[c];
    for (;;) {
      Bytes b;
      {
        std::unique_lock lk(cx.inMu);
        cx.inCv.wait(lk, [&] {
          if (stop) return true;
          for (auto& q : cx.inbox)
            if (!q.empty()) return true;
          return false;
        });
        if (stop) return;
        for (std::size_t k = 0; k < cx.inbox.size(); ++k) {
          auto& q = cx.inbox[(cx.rr + k) % cx.inbox.size()];
          if (q.empty()) continue;
          b = std::move(q.front());
          q.pop_front();
          cx.rr = (cx.rr + k + 1) % cx.inbox.size();
          break;
        }
      }
      try {
        on_bytes(c, b);
      } catch (...) {
        fail(std::current_exception());
        return;
      }
    }
  }

  // Caller holds c's lock.
  void maybe_steal(int c) {
    auto& cx = *ctx[c];
    if (!opt.balance || cx.stealPending || !cx.runnable.empty()) return;
    int best = -1;
    std::int64_t bestLoad = 1;
    for (auto [peer, load] : cx.peerLoad)
      if (load > bestLoad) {
        best = peer;
        bestLoad = load;
      }
    if (best < 0) return;
    cx.peerLoad[best] = 0;  // refreshed by the reply
    cx.stealPending = true;
    Envelope e;
    e.handler = kSteal;
    e.sender = c;
    ByteWriter w;
    w.i64(c);
    e.payload = w.take();
    emit(c, best, std::move(e));
  }

  void worker_loop(int c) {
    auto& cx = *ctx[c];
    for (;;) {
      Job job;
      {
        std::unique_lock lk(cx.mu);
        for (;;) {
          if (stop) return;
          if (take_job(cx, job)) break;
          maybe_steal(c);
          cx.workCv.wait(lk);
        }
      }
      run_one(c, job);
    }
  }

  Runtime* owner = nullptr;
};

HandlerContext::HandlerContext(Runtime& rt, Job& job, int context)
    : rt_(rt), job_(job), context_(context), self_{job.id}, object_(job.slot->obj.get()) {}

void HandlerContext::send(MobilePointer target, HandlerId handler, Bytes payload) {
  if (!target.valid()) throw Error(ErrorCode::UnknownObject, "send to a null pointer");
  job_.out.push_back({target, handler, std::move(payload), job_.slot->phase});
}

EventId HandlerContext::create_event(std::vector<MobilePointer> deps, HandlerId action,
                                     Bytes payload) {
  if (deps.empty()) throw Error(ErrorCode::InvalidArgument, "event needs at least one dependency");
  Slot& s = *job_.slot;
  EventRec ev;
  for (auto d : deps) ev.deps.insert(d.id);
  ev.action = action;
  ev.payload = std::move(payload);
  auto serial = s.nextEvent++;
  s.events.emplace(serial, std::move(ev));
  return {job_.id, serial};
}

void HandlerContext::satisfy(EventId event, MobilePointer dep) {
  ByteWriter w;
  w.u64(event.serial);
  w.u64(dep.id);
  send(MobilePointer{event.owner}, kSatisfy, w.take());
}

void HandlerContext::set_phase(std::string label) { job_.slot->phase = std::move(label); }
const std::string& HandlerContext::phase() const { return job_.slot->phase; }

void HandlerContext::note(const std::string& event, const std::string& detail) {
  job_.notes.push_back({job_.slot->phase, event, detail});
}

void HandlerContext::add_time(const std::string& phase, double seconds) {
  job_.times[phase] += seconds;
}

Runtime::Runtime(RuntimeOptions options) : impl_(std::make_unique<Impl>(options)) {
  impl_->owner = this;
}

Runtime::~Runtime() = default;

int Runtime::contexts() const { return impl_->n(); }
const RuntimeOptions& Runtime::options() const { return impl_->opt; }

void Runtime::register_type(const std::string& name, Factory factory) {
  impl_->factories[name] = std::move(factory);
}

void Runtime::register_handler(HandlerId id, std::string name, Handler handler) {
  if (id >= kSystem) throw Error(ErrorCode::InvalidArgument, "handler id is reserved");
  impl_->handlers[id] = {std::move(name), std::move(handler)};
}

MobilePointer Runtime::register_object(std::unique_ptr<MobileObject> object, int context) {
  if (context < 0 || context >= contexts())
    throw Error(ErrorCode::InvalidArgument, "no such context");
  auto& cx = *impl_->ctx[context];
  std::lock_guard lk(cx.mu);
  ObjectId id = (static_cast<ObjectId>(context + 1) << 32) | ++cx.nextSerial;
  auto s = std::make_unique<Slot>();
  s->obj = std::move(object);
  cx.objects[id] = std::move(s);
  cx.directory[id] = {context, 0};
  return {id};
}

namespace {

void check_known(const Runtime& rt, MobilePointer p) {
  if (p.home() < 0 || p.home() >= rt.contexts())
    throw Error(ErrorCode::UnknownObject, "invalid pointer " + to_string(p));
}

}  // namespace

void Runtime::invoke(MobilePointer target, HandlerId handler, Bytes payload) {
  check_known(*this, target);
  Envelope e;
  e.handler = handler;
  e.target = target;
  e.sender = -1;
  e.seq = impl_->driverSeq[target.id]++;
  e.phase = "driver";
  e.payload = std::move(payload);
  ++impl_->driverSent;
  impl_->add_log("driver,-1,send,driver>" + to_string(target) + ":" +
                 impl_->handler_name(handler) + ":" + std::to_string(e.payload.size()));
  impl_->emit(-1, target.home(), std::move(e));
}

void Runtime::migrate(MobilePointer target, int destination) {
  check_known(*this, target);
  if (destination < 0 || destination >= contexts())
    throw Error(ErrorCode::InvalidArgument, "no such context");
  Envelope e;
  e.handler = kMigrate;
  e.target = target;
  e.sender = -1;
  ByteWriter w;
  w.i64(destination);
  e.payload = w.take();
  impl_->emit(-1, target.home(), std::move(e));
}

EventId Runtime::create_event(MobilePointer owner, std::vector<MobilePointer> deps,
                              HandlerId action, Bytes payload) {
  if (deps.empty()) throw Error(ErrorCode::InvalidArgument, "event needs at least one dependency");
  // Driver-made serials live in the upper half so they never meet serials
  // the owner hands out itself.
  EventId id{owner.id, (1ULL << 63) | ++impl_->driverEvents};
  ByteWriter w;
  w.u64(id.serial);
  w.u64(deps.size());
  for (auto d : deps) w.u64(d.id);
  w.u64(action);
  w.bytes(payload);
  invoke(owner, kCreateEvent, w.take());
  return id;
}

void Runtime::satisfy(EventId event, MobilePointer dep) {
  ByteWriter w;
  w.u64(event.serial);
  w.u64(dep.id);
  invoke(MobilePointer{event.owner}, kSatisfy, w.take());
}

void Runtime::run() {
  auto& im = *impl_;
  auto t0 = Clock::now();
  im.stop = false;
  std::vector<std::thread> threads;
  for (int c = 0; c < contexts(); ++c) {
    threads.emplace_back([&im, c] { im.pump_loop(c); });
    for (int w = 0; w < im.opt.handlerWorkers; ++w)
      threads.emplace_back([&im, c] { im.worker_loop(c); });
  }
  {
    std::unique_lock lk(im.doneMu);
    im.doneCv.wait(lk, [&] { return im.inflight.load() == 0 || im.stop.load(); });
  }
  im.stop = true;
  for (auto& c : im.ctx) {
    {
      std::lock_guard lk(c->mu);
    }
    c->workCv.notify_all();
    {
      std::lock_guard lk(c->inMu);
    }
    c->inCv.notify_all();
  }
  for (auto& t : threads) t.join();
  im.wall += seconds_since(t0);
  std::lock_guard lk(im.errMu);
  if (im.error) {
    auto e = im.error;
    im.error = nullptr;
    std::rethrow_exception(e);
  }
}

void Runtime::run_simulated(const Chooser& choose) {
  auto& im = *impl_;
  auto t0 = Clock::now();
  im.stop = false;
  struct Action {
    int ctx;
    int src;  // -2 means "run a handler"
  };
  std::vector<Action> actions;
  for (;;) {
    actions.clear();
    for (int c = 0; c < contexts(); ++c) {
      auto& cx = *im.ctx[c];
      for (std::size_t s = 0; s < cx.inbox.size(); ++s)
        if (!cx.inbox[s].empty()) actions.push_back({c, static_cast<int>(s)});
      while (!cx.runnable.empty() && !cx.objects.count(cx.runnable.front()))
        cx.runnable.pop_front();
      if (!cx.runnable.empty()) actions.push_back({c, -2});
    }
    if (actions.empty()) break;
    auto pick = choose(actions.size());
    if (pick >= actions.size()) throw Error(ErrorCode::InvalidArgument, "chooser out of range");
    auto a = actions[pick];
    auto& cx = *im.ctx[a.ctx];
    if (a.src >= 0) {
      Bytes b = std::move(cx.inbox[a.src].front());
      cx.inbox[a.src].pop_front();
      im.on_bytes(a.ctx, b);
    } else {
      Job job;
      bool got;
      {
        std::lock_guard lk(cx.mu);
        got = im.take_job(cx, job);
      }
      if (got) im.run_one(a.ctx, job);
    }
    if (im.stop) break;
  }
  im.wall += seconds_since(t0);
  if (im.error) {
    auto e = im.error;
    im.error = nullptr;
    std::rethrow_exception(e);
  }
}

int Runtime::location(MobilePointer p) const {
  for (int c = 0; c < contexts(); ++c)
    if (impl_->ctx[c]->objects.count(p.id)) return c;
  throw Error(ErrorCode::UnknownObject, to_string(p) + " does not resolve");
}

MobileObject& Runtime::object(MobilePointer p) {
  int c = location(p);
  return *impl_->ctx[c]->objects.at(p.id)->obj;
}

std::vector<MobilePointer> Runtime::objects() const {
  std::vector<MobilePointer> out;
  for (const auto& c : impl_->ctx)
    for (const auto& [id, s] : c->objects) out.push_back({id});
  std::sort(out.begin(), out.end());
  return out;
}

MessageAudit Runtime::message_audit() const {
  auto& im = *impl_;
  MessageAudit a;
  for (const auto& c : im.ctx) a.contexts.push_back(c->audit);
  {
    std::lock_guard lk(im.auditMu);
    a.fanout = im.fanout;
  }
  // Fanout is charged to the context an object sent from most recently; with
  // migrations the per-object map is the precise record.
  for (const auto& [key, dests] : a.fanout) {
    MobilePointer p{key.first};
    int c = -1;
    for (int k = 0; k < contexts(); ++k)
      if (im.ctx[k]->objects.count(p.id)) c = k;
    if (c < 0) c = p.home();
    auto& slot = a.contexts[c].maxFanoutPerPhase;
    slot = std::max<std::int64_t>(slot, static_cast<std::int64_t>(dests.size()));
  }
  a.inFlight = im.driverSent + a.total_sent() - a.total_received();
  return a;
}

std::vector<std::string> Runtime::audit_log() const {
  auto& im = *impl_;
  std::vector<std::string> lines;
  {
    std::lock_guard lk(im.auditMu);
    lines = im.log;
  }
  auto a = message_audit();
  for (int c = 0; c < contexts(); ++c) {
    const auto& ca = a.contexts[c];
    lines.push_back("summary," + std::to_string(c) + ",p2p,sent=" + std::to_string(ca.p2pSent) +
                    ";received=" + std::to_string(ca.p2pReceived) +
                    ";maxFanout=" + std::to_string(ca.maxFanoutPerPhase) +
                    ";collectives=" + std::to_string(a.collectives));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

void Runtime::write_audit_log(std::ostream& os) const {
  os << "phase,context,event,detail\n";
  for (const auto& l : audit_log()) os << l << '\n';
}

std::vector<std::map<std::string, double>> Runtime::phase_times() const {
  std::vector<std::map<std::string, double>> out;
  for (const auto& c : impl_->ctx) {
    std::lock_guard lk(c->mu);
    out.push_back(c->times);
  }
  return out;
}

double Runtime::wall_seconds() const { return impl_->wall; }

}  // namespace tetshift::runtime
