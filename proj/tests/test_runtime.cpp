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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "tetshift/error.hpp"
#include "tetshift/runtime/runtime.hpp"

namespace tetshift::runtime {
namespace {

// Records every integer it is handed, in arrival order.
class Counter : public MobileObject {
 public:
  std::vector<std::int64_t> got;

  std::string type_name() const override { return "counter"; }
  Bytes pack() const override {
    ByteWriter w;
    w.u64(got.size());
    for (auto x : got) w.i64(x);
    return w.take();
  }
  static std::unique_ptr<MobileObject> unpack(std::span<const std::uint8_t> b) {
    ByteReader r(b);
    auto c = std::make_unique<Counter>();
    for (auto n = r.count(8); n > 0; --n) c->got.push_back(r.i64());
    return c;
  }
};

constexpr HandlerId hRecord = 1, hBurst = 2, hThrow = 3, hFired = 4;

Bytes num(std::int64_t x) {
  ByteWriter w;
  w.i64(x);
  return w.take();
}

std::int64_t read_num(const Bytes& b) {
  ByteReader r(b);
  return r.i64();
}

// hBurst payload: target id, count. Sends 0..count-1 to target.
Bytes burst(MobilePointer target, std::int64_t n) {
  ByteWriter w;
  w.u64(target.id);
  w.i64(n);
  return w.take();
}

void setup(Runtime& rt) {
  rt.register_type("counter", &Counter::unpack);
  rt.register_handler(hRecord, "record", [](HandlerContext& hc, const Envelope& e) {
    hc.as<Counter>().got.push_back(read_num(e.payload));
  });
  rt.register_handler(hBurst, "burst", [](HandlerContext& hc, const Envelope& e) {
    ByteReader r(e.payload);
    MobilePointer to{r.u64()};
    auto n = r.i64();
    hc.set_phase("burst");
    for (std::int64_t i = 0; i < n; ++i) hc.send(to, hRecord, num(i));
  });
  rt.register_handler(hThrow, "throw", [](HandlerContext& hc, const Envelope&) {
    hc.send(hc.self(), hRecord, num(1));
    throw Error(ErrorCode::ConformityBreak, "boom");
  });
  rt.register_handler(hFired, "fired", [](HandlerContext& hc, const Envelope& e) {
    hc.as<Counter>().got.push_back(-read_num(e.payload));
  });
}

std::vector<std::int64_t> iota(std::int64_t n) {
  std::vector<std::int64_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

TEST(Runtime, PointToPointIsFifo) {
  Runtime rt({.contexts = 3, .handlerWorkers = 2});
  setup(rt);
  auto a = rt.register_object(std::make_unique<Counter>(), 0);
  auto b = rt.register_object(std::make_unique<Counter>(), 2);
  rt.invoke(a, hBurst, burst(b, 500));
  rt.run();
  EXPECT_EQ(rt.object_as<Counter>(b).got, iota(500));
  EXPECT_TRUE(rt.object_as<Counter>(a).got.empty());
}

TEST(Runtime, EveryInvokeRunsExactlyOnce) {
  Runtime rt({.contexts = 3, .handlerWorkers = 2});
  setup(rt);
  std::vector<MobilePointer> objs;
  for (int i = 0; i < 10; ++i) objs.push_back(rt.register_object(std::make_unique<Counter>(), i % 3));
  for (int i = 0; i < 1000; ++i) rt.invoke(objs[i % 10], hRecord, num(i));
  rt.run();
  std::vector<std::int64_t> all;
  for (int i = 0; i < 10; ++i) {
    const auto& g = rt.object_as<Counter>(objs[i]).got;
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    all.insert(all.end(), g.begin(), g.end());
  }
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, iota(1000));
  auto audit = rt.message_audit();
  EXPECT_EQ(audit.collectives, 0);
  EXPECT_EQ(audit.inFlight, 0);
}

TEST(Runtime, MigrationMidStreamLosesNothing) {
  Runtime rt({.contexts = 3, .handlerWorkers = 2});
  setup(rt);
  auto a = rt.register_object(std::make_unique<Counter>(), 0);
  auto b = rt.register_object(std::make_unique<Counter>(), 1);
  rt.invoke(a, hBurst, burst(b, 2000));
  rt.migrate(b, 2);
  rt.run();
  EXPECT_EQ(rt.location(b), 2);
  EXPECT_EQ(rt.object_as<Counter>(b).got, iota(2000));
  auto audit = rt.message_audit();
  EXPECT_EQ(audit.contexts[1].migrationsOut, 1);
  EXPECT_EQ(audit.contexts[2].migrationsIn, 1);
  EXPECT_EQ(audit.inFlight, 0);
  EXPECT_GE(audit.total_received(), audit.total_sent());
  // Messages addressed to the old home still land, so the pointer stays valid.
  rt.invoke(b, hRecord, num(7));
  rt.run();
  EXPECT_EQ(rt.object_as<Counter>(b).got.back(), 7);
}

TEST(Runtime, EventFiresOnceWhenAllDepsAreSatisfied) {
  Runtime rt({.contexts = 2});
  setup(rt);
  auto owner = rt.register_object(std::make_unique<Counter>(), 1);
  auto x = rt.register_object(std::make_unique<Counter>(), 0);
  auto y = rt.register_object(std::make_unique<Counter>(), 0);
  auto ev = rt.create_event(owner, {x, y}, hFired, num(5));
  rt.satisfy(ev, x);
  rt.satisfy(ev, x);
  rt.run();
  EXPECT_TRUE(rt.object_as<Counter>(owner).got.empty());
  rt.satisfy(ev, y);
  rt.satisfy(ev, y);  // late duplicate after firing is ignored
  rt.run();
  EXPECT_EQ(rt.object_as<Counter>(owner).got, std::vector<std::int64_t>{-5});
}

TEST(Runtime, EventErrors) {
  {
    Runtime rt({.contexts = 2});
    setup(rt);
    auto owner = rt.register_object(std::make_unique<Counter>(), 1);
    auto x = rt.register_object(std::make_unique<Counter>(), 0);
    auto stranger = rt.register_object(std::make_unique<Counter>(), 0);
    EXPECT_THROW(rt.create_event(owner, {}, hFired), Error);
    auto ev = rt.create_event(owner, {x}, hFired, num(1));
    rt.satisfy(ev, stranger);
    try {
      rt.run();
      ADD_FAILURE() << "satisfying with a non-dependency must throw";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
  }
  {
    Runtime rt({.contexts = 2});
    setup(rt);
    auto owner = rt.register_object(std::make_unique<Counter>(), 1);
    rt.satisfy(EventId{owner.id, 999}, owner);
    try {
      rt.run();
      ADD_FAILURE() << "unknown event must throw";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UnknownEvent);
    }
  }
}

TEST(Runtime, HandlerExceptionPropagatesAndSendsNothing) {
  Runtime rt({.contexts = 2, .handlerWorkers = 2});
  setup(rt);
  auto a = rt.register_object(std::make_unique<Counter>(), 1);
  rt.invoke(a, hThrow);
  try {
    rt.run();
    ADD_FAILURE() << "expected the handler error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConformityBreak);
  }
}

TEST(Runtime, UnknownTargetsAndBadOptions) {
  EXPECT_THROW(Runtime({.contexts = 0}), Error);
  EXPECT_THROW(Runtime({.contexts = 1, .handlerWorkers = 0}), Error);
  Runtime rt({.contexts = 2});
  setup(rt);
  EXPECT_THROW(rt.location(MobilePointer{}), Error);
  EXPECT_THROW(rt.location(MobilePointer{(std::uint64_t{1} << 32) | 77}), Error);
  EXPECT_THROW(rt.register_object(std::make_unique<Counter>(), 5), Error);
}

TEST(Runtime, AuditCountsFanoutPerPhase) {
  Runtime rt({.contexts = 2});
  setup(rt);
  auto a = rt.register_object(std::make_unique<Counter>(), 0);
  auto b = rt.register_object(std::make_unique<Counter>(), 1);
  auto c = rt.register_object(std::make_unique<Counter>(), 1);
  rt.invoke(a, hBurst, burst(b, 3));
  rt.invoke(a, hBurst, burst(c, 2));
  rt.run();
  auto audit = rt.message_audit();
  EXPECT_EQ(audit.collectives, 0);
  auto it = audit.fanout.find({a.id, "burst"});
  ASSERT_NE(it, audit.fanout.end());
  EXPECT_EQ(it->second, (std::set<ObjectId>{b.id, c.id}));
  EXPECT_EQ(audit.contexts[0].maxFanoutPerPhase, 2);
  EXPECT_EQ(audit.inFlight, 0);
  EXPECT_GE(audit.total_received(), audit.total_sent());
}

TEST(Runtime, BalancingKeepsExactlyOnceDelivery) {
  Runtime rt({.contexts = 3, .handlerWorkers = 1, .balance = true});
  setup(rt);
  std::vector<MobilePointer> objs;
  for (int i = 0; i < 60; ++i) objs.push_back(rt.register_object(std::make_unique<Counter>(), 0));
  for (int round = 0; round < 20; ++round)
    for (int i = 0; i < 60; ++i) rt.invoke(objs[i], hRecord, num(round));
  rt.run();
  for (auto p : objs) EXPECT_EQ(rt.object_as<Counter>(p).got, iota(20));
  auto audit = rt.message_audit();
  std::int64_t in = 0, out = 0;
  for (const auto& c : audit.contexts) {
    in += c.migrationsIn;
    out += c.migrationsOut;
  }
  EXPECT_EQ(in, out);
}

TEST(Runtime, SimulatedInterleavingsAgree) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Runtime rt({.contexts = 3});
    setup(rt);
    auto a = rt.register_object(std::make_unique<Counter>(), 0);
    auto b = rt.register_object(std::make_unique<Counter>(), 1);
    auto c = rt.register_object(std::make_unique<Counter>(), 2);
    rt.invoke(a, hBurst, burst(c, 30));
    rt.invoke(b, hBurst, burst(c, 30));
    rt.migrate(c, 0);
    std::mt19937_64 rng(seed);
    rt.run_simulated([&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); });
    auto got = rt.object_as<Counter>(c).got;
    ASSERT_EQ(got.size(), 60u);
    // Each sender's stream stays ordered even though the two interleave.
    std::vector<std::int64_t> firsts, seconds;
    std::map<std::int64_t, int> seen;
    for (auto x : got) (seen[x]++ == 0 ? firsts : seconds).push_back(x);
    EXPECT_EQ(firsts, iota(30));
    EXPECT_EQ(seconds, iota(30));
    EXPECT_EQ(rt.location(c), 0);
  }
}

TEST(Envelope, RoundTripAndTruncation) {
  Envelope e;
  e.handler = 42;
  e.target.id = (std::uint64_t{3} << 32) | 9;
  e.from.id = (std::uint64_t{1} << 32) | 2;
  e.payload = {1, 2, 3, 250};
  e.sender = 2;
  e.seq = 77;
  e.phase = "iter0003:shift";
  e.load = -4;
  auto b = e.pack();
  auto d = Envelope::unpack(b);
  EXPECT_EQ(d.handler, e.handler);
  EXPECT_EQ(d.target, e.target);
  EXPECT_EQ(d.from, e.from);
  EXPECT_EQ(d.payload, e.payload);
  EXPECT_EQ(d.sender, e.sender);
  EXPECT_EQ(d.seq, e.seq);
  EXPECT_EQ(d.phase, e.phase);
  EXPECT_EQ(d.load, e.load);
  for (std::size_t n = 0; n < b.size(); ++n)
    EXPECT_THROW(Envelope::unpack(std::span(b.data(), n)), Error) << n;
  b.push_back(0);
  EXPECT_THROW(Envelope::unpack(b), Error);
}

TEST(MobilePointer, HomeIsEncodedInTheId) {
  MobilePointer p{(std::uint64_t{3} << 32) | 5};
  EXPECT_TRUE(p.valid());
  EXPECT_EQ(p.home(), 2);
  EXPECT_FALSE(MobilePointer{}.valid());
}

}  // namespace
}  // namespace tetshift::runtime
