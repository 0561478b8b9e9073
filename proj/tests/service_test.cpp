#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "hotpool/cloud.hpp"
#include "hotpool/kernel.hpp"
#include "hotpool/service.hpp"

using namespace hotpool;

namespace {

// A small hot-pool world without clients.
struct Bench {
  Kernel k;
  CloudProvider cloud;
  Database db;
  LoadBalancer lb;
  ServiceEndpoint ep;
  WorkerFactory factory;
  ActorRef driver;

  explicit Bench(std::uint64_t seed = 1, Rational db_time = Rational(1), Rational speed = Rational(81),
                 Rational deadline = Rational(10))
      : k(seed),
        cloud(k),
        db(k, Duration(db_time)),
        lb(k),
        ep(k, lb, Duration(deadline)),
        factory(k, cloud, db, speed) {
    driver = k.spawn("driver");
  }

  Worker* add_now() {
    Worker* w = factory.deploy();
    k.send(lb.ref(), lb.add_worker(w));
    return w;
  }
};

Proc<bool> call_process(Kernel& k, Worker* w, Rational cost, Time started, Duration deadline, Time& done) {
  Future<bool> f = k.send(w->ref(), w->process(cost, started, deadline));
  bool ok = co_await f;
  done = k.now();
  co_return ok;
}

Proc<bool> process_later(Kernel& k, Worker* w, Rational delay, Time& done) {
  co_await k.sleep(Duration(delay));
  Future<bool> f = k.send(w->ref(), w->process(Rational(0), Time(0), Duration(10)));
  bool ok = co_await f;
  done = k.now();
  co_return ok;
}

Proc<bool> call_db(Kernel& k, Database& db, Rational remaining, Time& done) {
  Future<bool> f = k.send(db.ref(), db.access_data(remaining));
  bool ok = co_await f;
  done = k.now();
  co_return ok;
}

Proc<void> invoke_at(Kernel& k, ServiceEndpoint& ep, Rational at, Rational cost) {
  if (at > 0) co_await k.sleep(Duration(at));
  Future<bool> f = k.send(ep.ref(), ep.invoke_service(cost));
  co_await f;
}

Proc<void> acquire_n(Kernel& k, LoadBalancer& lb, int n, std::vector<Worker*>& got) {
  for (int i = 0; i < n; ++i) {
    Future<Worker*> f = k.send(lb.ref(), lb.get_worker());
    got.push_back(co_await f);
  }
}

Proc<void> fire_one(Kernel& k, LoadBalancer& lb, Worker*& fired, Time& when) {
  Future<Worker*> f = k.send(lb.ref(), lb.firing_worker());
  fired = co_await f;
  when = k.now();
}

Proc<void> add_at(Kernel& k, LoadBalancer& lb, Worker* w, Rational at) {
  co_await k.sleep(Duration(at));
  Future<void> f = k.send(lb.ref(), lb.add_worker(w));
  co_await f;
}

}  // namespace

TEST(Worker, UnqueuedJobMeetsDeadline) {
  Bench b;
  Worker* w = b.factory.deploy();
  Time done;
  Future<bool> ok = b.k.send(b.driver, call_process(b.k, w, 81, Time(0), Duration(10), done));
  b.k.run_until(Time(20));
  EXPECT_TRUE(ok.get());
  EXPECT_EQ(done, Time(2));
}

TEST(Worker, AlreadyExpiredJobFails) {
  Bench b;
  Worker* w = b.factory.deploy();
  Time done;
  // Started 12 units before the job begins.
  Future<bool> ok = b.k.send(b.driver, process_later(b.k, w, 12, done));
  b.k.run_until(Time(20));
  EXPECT_FALSE(ok.get());
  EXPECT_EQ(done, Time(13));
}

TEST(Worker, FreeJobWithInstantDatabase) {
  Bench b(1, Rational(0));
  Worker* w = b.factory.deploy();
  Time done(99);
  Future<bool> ok = b.k.send(b.driver, call_process(b.k, w, 0, Time(0), Duration(10), done));
  b.k.run_until(Time(1));
  EXPECT_TRUE(ok.get());
  EXPECT_EQ(done, Time(0));
}

TEST(Database, AccessTakesItsDurationAndChecksRemaining) {
  for (auto [remaining, expected] : {std::pair{Rational(9), true}, std::pair{Rational(1, 2), false},
                                     std::pair{Rational(-3), false}, std::pair{Rational(1), true}}) {
    Bench b;
    Time done;
    Future<bool> ok = b.k.send(b.driver, call_db(b.k, b.db, remaining, done));
    b.k.run_until(Time(5));
    EXPECT_EQ(ok.get(), expected) << remaining;
    EXPECT_EQ(done, Time(1));
  }
}

TEST(WorkerPool, ListOperationsFollowTheRoundRobinRules) {
  WorkerPool<int> p;
  p.add(1);
  p.add(2);
  EXPECT_EQ(p.available(), (std::deque<int>{1, 2}));
  EXPECT_EQ(p.acquire(), 1);
  EXPECT_EQ(p.available(), (std::deque<int>{2}));
  EXPECT_EQ(p.in_use(), (std::deque<int>{1}));
  EXPECT_EQ(p.acquire(), 2);
  p.release(1);
  EXPECT_EQ(p.in_use(), (std::deque<int>{2}));
  EXPECT_EQ(p.available(), (std::deque<int>{1}));
}

TEST(WorkerPool, DuplicateAddFails) {
  WorkerPool<int> p;
  p.add(1);
  p.acquire();
  try {
    p.add(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "duplicate worker");
  }
  p.add(2);
  EXPECT_THROW(p.add(2), Error);
}

TEST(WorkerPool, ReleaseOfIdleWorkerFails) {
  WorkerPool<int> p;
  p.add(1);
  try {
    p.release(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "not in use");
  }
  EXPECT_THROW(p.release(7), Error);
}

TEST(WorkerPool, RotationAlternatesOnTwoWorkers) {
  WorkerPool<int> p;
  p.add(1);
  p.add(2);
  std::vector<int> order;
  for (int i = 0; i < 6; ++i) {
    int w = p.acquire();
    order.push_back(w);
    p.release(w);
  }
  EXPECT_EQ(order, (std::vector<int>{1, 2, 1, 2, 1, 2}));
}

TEST(WorkerPool, ReleaseThenGetOnSingletonReturnsSameWorker) {
  WorkerPool<int> p;
  p.add(5);
  p.release(p.acquire());
  EXPECT_EQ(p.acquire(), 5);
}

TEST(WorkerPool, FireTakesTheLastIdleWorker) {
  WorkerPool<int> p;
  for (int i = 1; i <= 3; ++i) p.add(i);
  EXPECT_EQ(p.fire(), 3);
  EXPECT_EQ(p.available(), (std::deque<int>{1, 2}));
  WorkerPool<int> q;
  q.add(1);
  EXPECT_EQ(q.fire(), 1);
  EXPECT_EQ(q.available_count(), 0u);
}

TEST(LoadBalancer, FreshBalancerIsEmpty) {
  Kernel k(1);
  LoadBalancer lb(k);
  EXPECT_EQ(lb.pool().available_count(), 0u);
  EXPECT_EQ(lb.pool().in_use_count(), 0u);
}

TEST(LoadBalancer, CountsBeforeAndAfterGetWorker) {
  Bench b;
  b.add_now();
  b.add_now();
  b.add_now();
  std::vector<Worker*> got;
  b.k.send(b.driver, acquire_n(b.k, b.lb, 1, got));
  b.k.run_until(Time(1));
  auto counts = b.k.send(b.driver, b.lb.counts());
  b.k.run_until(Time(2));
  EXPECT_EQ(counts.get(), (std::pair<std::size_t, std::size_t>{2, 1}));
  std::vector<Worker*> more;
  b.k.send(b.driver, acquire_n(b.k, b.lb, 1, more));
  auto after = b.k.send(b.lb.ref(), b.lb.counts());
  b.k.run_until(Time(3));
  // Whichever ran first, the final state is one idle and two in use.
  EXPECT_EQ(b.lb.pool().available_count(), 1u);
  EXPECT_EQ(b.lb.pool().in_use_count(), 2u);
  (void)after;
}

TEST(LoadBalancer, GetWorkerWaitsForAnAdd) {
  Bench b;
  Worker* w = b.factory.deploy();
  std::vector<Worker*> got;
  b.k.send(b.driver, acquire_n(b.k, b.lb, 1, got));
  ActorRef admin = b.k.spawn("admin");
  b.k.send(admin, add_at(b.k, b.lb, w, 3));
  b.k.run_until(Time(10));
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], w);
}

TEST(LoadBalancer, FiringWaitsForAPendingAdd) {
  Bench b;
  Worker* w9 = b.factory.deploy();
  Worker* fired = nullptr;
  Time when;
  b.k.send(b.driver, fire_one(b.k, b.lb, fired, when));
  ActorRef admin = b.k.spawn("admin");
  b.k.send(admin, add_at(b.k, b.lb, w9, 4));
  b.k.run_until(Time(10));
  EXPECT_EQ(fired, w9);
  EXPECT_EQ(when, Time(4));
  EXPECT_EQ(b.lb.pool().size(), 0u);
}

TEST(Endpoint, SingleRequestOnIdlePoolSucceeds) {
  Bench b;
  b.add_now();
  b.k.send(b.driver, invoke_at(b.k, b.ep, 0, 81));
  b.k.run_until(Time(10));
  ASSERT_EQ(b.ep.requests().size(), 1u);
  const auto& r = b.ep.requests()[0];
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.issued_at, Time(0));
  EXPECT_EQ(*r.completed_at, Time(2));
  EXPECT_EQ(b.lb.pool().available_count(), 1u);
}

TEST(Endpoint, LateJobStillReleasesItsWorker) {
  Bench b;
  b.add_now();
  ActorRef c2 = b.k.spawn("c2");
  b.k.send(b.driver, invoke_at(b.k, b.ep, 0, 81 * 15));
  b.k.send(c2, invoke_at(b.k, b.ep, Rational(1, 2), 81));
  b.k.run_until(Time(50));
  ASSERT_EQ(b.ep.requests().size(), 2u);
  const auto& long_job = b.ep.requests()[0];
  const auto& queued = b.ep.requests()[1];
  EXPECT_FALSE(long_job.success);
  EXPECT_EQ(*long_job.completed_at, Time(16));
  // Acquires at 16, computes until 17, then the database call.
  EXPECT_FALSE(queued.success);
  EXPECT_EQ(*queued.completed_at, Time(18));
  EXPECT_EQ(b.lb.pool().available_count(), 1u);
  EXPECT_EQ(b.lb.pool().in_use_count(), 0u);
}

TEST(Endpoint, QueueWaitCountsAgainstTheDeadline) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Bench b(seed);
    b.add_now();
    ActorRef c2 = b.k.spawn("c2");
    b.k.send(b.driver, invoke_at(b.k, b.ep, 0, 81 * 5));
    b.k.send(c2, invoke_at(b.k, b.ep, 0, 81 * 5));
    b.k.run_until(Time(50));
    const auto& rs = b.ep.requests();
    ASSERT_EQ(rs.size(), 2u);
    // The first served finishes at 6 with 5 to spare; the second waited 6,
    // so 10 - 11 < 1 fails even though its own service took 6.
    int ok = rs[0].success + rs[1].success;
    EXPECT_EQ(ok, 1);
    std::set<Time> finished{*rs[0].completed_at, *rs[1].completed_at};
    EXPECT_EQ(finished, (std::set<Time>{Time(6), Time(12)}));
    for (const auto& r : rs) EXPECT_EQ(r.success, *r.completed_at == Time(6));
  }
}

TEST(Endpoint, ResponseTimeMustBePositive) {
  Kernel k(1);
  LoadBalancer lb(k);
  EXPECT_THROW(ServiceEndpoint(k, lb, Duration(0)), Error);
}

// Single worker, FIFO service: success iff the analytic response time leaves
// at least the database time. Arrival fractions are distinct so no arrival
// ever coincides with a release.
TEST(EndpointProperty, DeadlineMatchesSingleServerTrace) {
  std::mt19937_64 g(21);
  for (int c = 0; c < 300; ++c) {
    const long den = 1009;
    const std::size_t n = 1 + g() % 8;
    std::vector<Rational> arrivals, costs;
    std::set<long> fractions;
    long whole = 0;
    for (std::size_t i = 0; i < n; ++i) {
      long frac;
      do frac = 1 + static_cast<long>(g() % (den - 1));
      while (!fractions.insert(frac).second);
      whole += static_cast<long>(g() % 4);
      arrivals.push_back(Rational(whole * den + frac, den));
      costs.push_back(Rational(81 * static_cast<long>(g() % 5)));
    }
    std::sort(arrivals.begin(), arrivals.end());
    Bench b(g());
    b.add_now();
    for (std::size_t i = 0; i < n; ++i) {
      ActorRef client = b.k.spawn("c" + std::to_string(i));
      b.k.send(client, invoke_at(b.k, b.ep, arrivals[i], costs[i]));
    }
    b.k.run_until(Time(500));

    Rational free_at(0);
    std::vector<bool> expected;
    std::vector<Rational> finish;
    for (std::size_t i = 0; i < n; ++i) {
      Rational start = std::max(arrivals[i], free_at);
      Rational computed = start + costs[i] / 81;
      expected.push_back(Rational(10) - (computed - arrivals[i]) >= 1);
      free_at = computed + 1;
      finish.push_back(free_at);
    }
    const auto& rs = b.ep.requests();
    ASSERT_EQ(rs.size(), n);
    // Records are in issue order, which is arrival order.
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(rs[i].issued_at.value(), arrivals[i]) << "case " << c;
      ASSERT_EQ(rs[i].success, expected[i]) << "case " << c << " request " << i;
      ASSERT_EQ(rs[i].completed_at->value(), finish[i]) << "case " << c << " request " << i;
    }
  }
}

TEST(PoolProperty, DisjointnessAndConservationUnderRandomOperations) {
  std::mt19937_64 g(22);
  for (int c = 0; c < 1000; ++c) {
    WorkerPool<int> p;
    int next_id = 0;
    std::size_t expected_size = 0;
    for (int step = 0; step < 60; ++step) {
      const std::size_t before = p.size();
      switch (g() % 5) {
        case 0:
          p.add(next_id++);
          ++expected_size;
          break;
        case 1:
          if (p.size() > 0) {
            std::vector<int> members(p.available().begin(), p.available().end());
            members.insert(members.end(), p.in_use().begin(), p.in_use().end());
            EXPECT_THROW(p.add(members[g() % members.size()]), Error);
          }
          break;
        case 2:
          if (p.available_count() > 0) {
            p.acquire();
          } else {
            EXPECT_THROW(p.acquire(), Error);
          }
          break;
        case 3:
          if (p.in_use_count() > 0) {
            p.release(p.in_use()[g() % p.in_use_count()]);
          } else {
            EXPECT_THROW(p.release(0), Error);
          }
          break;
        default:
          if (p.available_count() > 0) {
            p.fire();
            --expected_size;
          }
          break;
      }
      ASSERT_LE(p.size() > before ? p.size() - before : before - p.size(), 1u);
      ASSERT_EQ(p.size(), expected_size);
      std::set<int> a(p.available().begin(), p.available().end());
      std::set<int> u(p.in_use().begin(), p.in_use().end());
      ASSERT_EQ(a.size(), p.available_count()) << "duplicate in available";
      ASSERT_EQ(u.size(), p.in_use_count()) << "duplicate in in_use";
      for (int x : a) ASSERT_FALSE(u.contains(x)) << "lists overlap";
    }
  }
}

TEST(Autoscaler, DecisionTable) {
  EXPECT_EQ(autoscaler_decide(2, 10, 10), ResizeAction(ScaleUp{20}));
  EXPECT_EQ(autoscaler_decide(12, 9, 10), ResizeAction(ScaleDown{6}));
  EXPECT_EQ(autoscaler_decide(5, 15, 10), ResizeAction(NoChange{}));
  EXPECT_EQ(autoscaler_decide(0, 0, 10), ResizeAction(NoChange{}));
  EXPECT_EQ(autoscaler_decide(5, 9, 10), ResizeAction(NoChange{}));
  EXPECT_EQ(autoscaler_decide(1, 9, 10), ResizeAction(ScaleUp{18}));
  EXPECT_EQ(autoscaler_decide(16, 2, 10), ResizeAction(ScaleDown{8}));
  EXPECT_EQ(autoscaler_decide(11, 0, 10), ResizeAction(ScaleDown{6}));
}

TEST(Autoscaler, DecideRejectsBadInputs) {
  EXPECT_THROW(autoscaler_decide(-1, 0, 10), Error);
  EXPECT_THROW(autoscaler_decide(0, -1, 10), Error);
  EXPECT_THROW(autoscaler_decide(0, 0, 0), Error);
}

TEST(AutoscalerProperty, ConditionsAreMutuallyExclusiveAndCountsPositive) {
  for (std::int64_t a = 0; a <= 100; ++a)
    for (std::int64_t i = 0; i <= 100; ++i) {
      const bool up = 3 * a < i;
      const bool down = i < 3 * a;
      ASSERT_FALSE(up && down);
      // Sequential ifs and else-if agree.
      ResizeAction sequential = NoChange{};
      if (up) sequential = ScaleUp{2 * i};
      if (down && a > 10) sequential = ScaleDown{(a + 1) / 2};
      ResizeAction got = autoscaler_decide(a, i, 10);
      ASSERT_EQ(got, sequential) << a << "," << i;
      if (const auto* u = std::get_if<ScaleUp>(&got)) {
        ASSERT_GE(u->count, 1);
      }
      if (const auto* d = std::get_if<ScaleDown>(&got)) {
        ASSERT_GE(d->count, 1);
        ASSERT_EQ(d->count, ceil_of(make_rational(static_cast<long>(a), 2)));
      }
    }
}

TEST(Autoscaler, RunDeploysTheBaseline) {
  for (std::int64_t baseline : {1, 10}) {
    Bench b;
    Autoscaler as(b.k, b.cloud, b.lb, b.factory, AutoscalerConfig{baseline, Rational(5)});
    b.k.send(as.ref(), as.run());
    b.k.run_until(Time(1));
    EXPECT_EQ(b.cloud.active_count(), static_cast<std::size_t>(baseline));
    EXPECT_EQ(b.lb.pool().available_count(), static_cast<std::size_t>(baseline));
    EXPECT_EQ(b.lb.pool().in_use_count(), 0u);
    EXPECT_EQ(b.cloud.accumulated_cost(Time(5)), Rational(50 * baseline));
  }
}

TEST(Autoscaler, ConfigIsValidated) {
  Bench b;
  EXPECT_THROW(Autoscaler(b.k, b.cloud, b.lb, b.factory, AutoscalerConfig{0, Rational(5)}), Error);
  EXPECT_THROW(Autoscaler(b.k, b.cloud, b.lb, b.factory, AutoscalerConfig{10, Rational(0)}), Error);
}

TEST(Autoscaler, BurstCountsAddEighteenWorkers) {
  Bench b;
  for (int i = 0; i < 10; ++i) b.add_now();
  std::vector<Worker*> held;
  b.k.send(b.driver, acquire_n(b.k, b.lb, 9, held));
  Autoscaler as(b.k, b.cloud, b.lb, b.factory, AutoscalerConfig{10, Rational(5)});
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  as.on_decision([&](std::size_t a, std::size_t i, const ResizeAction&) { seen.emplace_back(a, i); });
  b.k.send(as.ref(), as.resize());
  b.k.run_until(Time(6));
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(seen[0], (std::pair<std::size_t, std::size_t>{1, 9}));
  EXPECT_EQ(b.cloud.active_count(), 28u);
  EXPECT_EQ(b.lb.pool().available_count(), 19u);
}

TEST(Autoscaler, QuietCountsFireEightIdleWorkers) {
  Bench b;
  for (int i = 0; i < 18; ++i) b.add_now();
  std::vector<Worker*> held;
  b.k.send(b.driver, acquire_n(b.k, b.lb, 2, held));
  Autoscaler as(b.k, b.cloud, b.lb, b.factory, AutoscalerConfig{10, Rational(5)});
  std::vector<ResizeAction> actions;
  as.on_decision([&](std::size_t, std::size_t, const ResizeAction& a) { actions.push_back(a); });
  b.k.send(as.ref(), as.resize());
  b.k.run_until(Time(6));
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0], ResizeAction(ScaleDown{8}));
  EXPECT_EQ(b.cloud.active_count(), 10u);
  EXPECT_EQ(b.lb.pool().available_count(), 8u);
  EXPECT_EQ(b.lb.pool().in_use_count(), 2u);
  for (Worker* w : held) EXPECT_TRUE(w->vm().active());
  for (Worker* w : b.lb.pool().available()) EXPECT_TRUE(w->vm().active());
}

TEST(Autoscaler, IdleBalancerLeavesFleetAlone) {
  Bench b;
  Autoscaler as(b.k, b.cloud, b.lb, b.factory, AutoscalerConfig{10, Rational(5)});
  int decisions = 0;
  as.on_decision([&](std::size_t a, std::size_t i, const ResizeAction& act) {
    ++decisions;
    EXPECT_EQ(a, 0u);
    EXPECT_EQ(i, 0u);
    EXPECT_EQ(act, ResizeAction(NoChange{}));
  });
  b.k.send(as.ref(), as.resize());
  b.k.run_until(Time(21));
  EXPECT_EQ(decisions, 4);
  EXPECT_EQ(b.cloud.active_count(), 0u);
}
