#pragma once

// The hot-pool service: workers on their own VMs, a shared database, a
// round-robin load balancer, the service endpoint, and the autoscaler.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hotpool/cloud.hpp"
#include "hotpool/kernel.hpp"
#include "hotpool/rational.hpp"

namespace hotpool {

/// The two worker lists of the round-robin balancer. Plain data; the
/// LoadBalancer actor adds the suspension semantics on top.
template <class W>
class WorkerPool {
 public:
  const std::deque<W>& available() const { return available_; }
  const std::deque<W>& in_use() const { return in_use_; }
  std::size_t available_count() const { return available_.size(); }
  std::size_t in_use_count() const { return in_use_.size(); }
  std::size_t size() const { return available_.size() + in_use_.size(); }

  void add(W w) {
    if (contains(available_, w) || contains(in_use_, w)) throw Error("duplicate worker");
    available_.push_back(std::move(w));
  }

  /// Moves the head of `available` to the tail of `in_use`.
  W acquire() {
    if (available_.empty()) throw Error("no available worker");
    W w = available_.front();
    available_.pop_front();
    in_use_.push_back(w);
    return w;
  }

  /// Takes `w` by value so a reference into `in_use` survives the erase.
  void release(W w) {
    auto it = std::find(in_use_.begin(), in_use_.end(), w);
    if (it == in_use_.end()) throw Error("not in use");
    in_use_.erase(it);
    available_.push_back(std::move(w));
  }

  /// Removes the last available worker for good.
  W fire() {
    if (available_.empty()) throw Error("no available worker");
    W w = available_.back();
    available_.pop_back();
    return w;
  }

 private:
  static bool contains(const std::deque<W>& list, const W& w) {
    return std::find(list.begin(), list.end(), w) != list.end();
  }

  std::deque<W> available_;
  std::deque<W> in_use_;
};

/// Shared database on the unbounded environment. Every access takes exactly
/// `duration` and succeeds iff the caller still has that much time left.
class Database {
 public:
  Database(Kernel& kernel, Duration duration) : kernel_(kernel), duration_(std::move(duration)) {
    self_ = kernel_.spawn("database");
  }

  ActorRef ref() const { return self_; }
  const Duration& duration() const { return duration_; }

  Proc<bool> access_data(Rational remaining) {
    co_await kernel_.sleep(duration_);
    co_return remaining >= duration_.value();
  }

 private:
  Kernel& kernel_;
  Duration duration_;
  ActorRef self_;
};

class Worker {
 public:
  Worker(Kernel& kernel, Database& db, DeploymentComponent& vm, std::size_t index)
      : kernel_(kernel), db_(db), vm_(vm) {
    self_ = kernel_.spawn("worker-" + std::to_string(index), &vm);
  }

  ActorRef ref() const { return self_; }
  DeploymentComponent& vm() const { return vm_; }

  /// Runs one job. `started` is when the request reached the endpoint, so
  /// queueing delay counts against the deadline.
  Proc<bool> process(Rational task_cost, Time started, Duration deadline) {
    co_await kernel_.consume(task_cost);
    Rational remaining = deadline.value() - (kernel_.now() - started);
    Future<bool> ok = kernel_.send(db_.ref(), db_.access_data(remaining));
    bool success = co_await ok;
    co_return success;
  }

  Proc<DeploymentComponent*> get_dc() { co_return this_dc(kernel_, self_); }

 private:
  Kernel& kernel_;
  Database& db_;
  DeploymentComponent& vm_;
  ActorRef self_;
};

/// Round-robin balancer. By default callers blocked in get_worker or
/// firing_worker are served in the order they started waiting.
class LoadBalancer {
 public:
  explicit LoadBalancer(Kernel& kernel, ConditionWake wake = ConditionWake::oldest_first) : kernel_(kernel) {
    self_ = kernel_.spawn("load-balancer", nullptr, wake);
  }

  ActorRef ref() const { return self_; }
  const WorkerPool<Worker*>& pool() const { return pool_; }

  Proc<void> add_worker(Worker* w) {
    pool_.add(w);
    co_return;
  }

  Proc<Worker*> get_worker() {
    co_await kernel_.until([this] { return pool_.available_count() > 0; });
    co_return pool_.acquire();
  }

  Proc<void> release_worker(Worker* w) {
    pool_.release(w);
    co_return;
  }

  Proc<Worker*> firing_worker() {
    co_await kernel_.until([this] { return pool_.available_count() > 0; });
    co_return pool_.fire();
  }

  /// (available, in use), read at one scheduling point.
  Proc<std::pair<std::size_t, std::size_t>> counts() {
    co_return std::pair{pool_.available_count(), pool_.in_use_count()};
  }

 private:
  Kernel& kernel_;
  ActorRef self_;
  WorkerPool<Worker*> pool_;
};

/// One service invocation as seen by the endpoint.
struct RequestRecord {
  Time issued_at;
  std::optional<Time> completed_at;
  bool success = false;
};

class ServiceEndpoint {
 public:
  ServiceEndpoint(Kernel& kernel, LoadBalancer& lb, Duration response_time)
      : kernel_(kernel), lb_(lb), response_time_(std::move(response_time)) {
    if (response_time_.value() <= 0) throw Error("response time must be positive");
    self_ = kernel_.spawn("endpoint");
  }

  ActorRef ref() const { return self_; }
  const std::vector<RequestRecord>& requests() const { return requests_; }

  Proc<bool> invoke_service(Rational cost) {
    const Time started = kernel_.now();
    const std::size_t slot = requests_.size();
    requests_.push_back(RequestRecord{started, std::nullopt, false});

    Future<Worker*> acquired = kernel_.send(lb_.ref(), lb_.get_worker());
    Worker* w = co_await acquired;
    Future<bool> job = kernel_.send(w->ref(), w->process(cost, started, response_time_));
    bool success = co_await job;
    Future<void> released = kernel_.send(lb_.ref(), lb_.release_worker(w));
    co_await released;

    requests_[slot].completed_at = kernel_.now();
    requests_[slot].success = success;
    co_return success;
  }

 private:
  Kernel& kernel_;
  LoadBalancer& lb_;
  Duration response_time_;
  ActorRef self_;
  std::vector<RequestRecord> requests_;
};

/// Owns the workers of one world; they are never destroyed during a run
/// because fired workers keep their (inactive) VM reference.
class WorkerFactory {
 public:
  WorkerFactory(Kernel& kernel, CloudProvider& cloud, Database& db, Rational per_vm_speed)
      : kernel_(kernel), cloud_(cloud), db_(db), speed_(std::move(per_vm_speed)) {}

  /// Launches a VM and deploys a fresh worker on it.
  Worker* deploy() {
    DeploymentComponent& vm = cloud_.launch_instance({{ResourceKind::speed, speed_}});
    workers_.push_back(std::make_unique<Worker>(kernel_, db_, vm, workers_.size() + 1));
    return workers_.back().get();
  }

  std::size_t deployed() const { return workers_.size(); }

 private:
  Kernel& kernel_;
  CloudProvider& cloud_;
  Database& db_;
  Rational speed_;
  std::vector<std::unique_ptr<Worker>> workers_;
};

struct NoChange {
  friend bool operator==(const NoChange&, const NoChange&) = default;
};
struct ScaleUp {
  std::int64_t count;
  friend bool operator==(const ScaleUp&, const ScaleUp&) = default;
};
struct ScaleDown {
  std::int64_t count;
  friend bool operator==(const ScaleDown&, const ScaleDown&) = default;
};

using ResizeAction = std::variant<NoChange, ScaleUp, ScaleDown>;

/// Threshold policy. Scale up to 2*inuse extra workers when fewer than a
/// quarter of the pool is idle; halve the idle workers (rounding the count
/// up) when idle > inuse/3 and idle exceeds the baseline. Comparisons are
/// done on integers: a < (a+i)/4 <=> 3a < i and i/3 < a <=> i < 3a.
inline ResizeAction autoscaler_decide(std::int64_t available, std::int64_t inuse, std::int64_t baseline) {
  if (available < 0 || inuse < 0) throw Error("negative worker count");
  if (baseline < 1) throw Error("baseline must be >= 1");
  if (3 * available < inuse) return ScaleUp{2 * inuse};
  if (inuse < 3 * available && available > baseline) return ScaleDown{(available + 1) / 2};
  return NoChange{};
}

struct AutoscalerConfig {
  std::int64_t baseline = 10;
  Rational resize_cycle{5};
};

class Autoscaler {
 public:
  Autoscaler(Kernel& kernel, CloudProvider& cloud, LoadBalancer& lb, WorkerFactory& factory, AutoscalerConfig config)
      : kernel_(kernel), cloud_(cloud), lb_(lb), factory_(factory), config_(std::move(config)) {
    if (config_.baseline < 1) throw Error("baseline must be >= 1");
    if (config_.resize_cycle <= 0) throw Error("resize cycle must be positive");
    self_ = kernel_.spawn("autoscaler");
  }

  ActorRef ref() const { return self_; }

  /// Observer hook, called with every decision and the counts it was based on.
  void on_decision(std::function<void(std::size_t, std::size_t, const ResizeAction&)> fn) {
    observer_ = std::move(fn);
  }

  Proc<void> run() {
    for (std::int64_t i = 0; i < config_.baseline; ++i) {
      Worker* w = factory_.deploy();
      kernel_.send(lb_.ref(), lb_.add_worker(w));
    }
    kernel_.send(self_, resize());
    co_return;
  }

  Proc<void> resize() {
    co_await kernel_.sleep(Duration(config_.resize_cycle));
    Future<std::pair<std::size_t, std::size_t>> read = kernel_.send(lb_.ref(), lb_.counts());
    auto [available, inuse] = co_await read;
    ResizeAction action = autoscaler_decide(static_cast<std::int64_t>(available),
                                            static_cast<std::int64_t>(inuse), config_.baseline);
    if (observer_) observer_(available, inuse, action);

    if (const auto* up = std::get_if<ScaleUp>(&action)) {
      for (std::int64_t i = 0; i < up->count; ++i) {
        Worker* w = factory_.deploy();
        Future<void> added = kernel_.send(lb_.ref(), lb_.add_worker(w));
        co_await added;
      }
    } else if (const auto* down = std::get_if<ScaleDown>(&action)) {
      for (std::int64_t i = 0; i < down->count; ++i) {
        Future<Worker*> fired = kernel_.send(lb_.ref(), lb_.firing_worker());
        Worker* w = co_await fired;
        Future<DeploymentComponent*> where = kernel_.send(w->ref(), w->get_dc());
        DeploymentComponent* dc = co_await where;
        cloud_.shutdown_instance(*dc);
      }
    }
    kernel_.send(self_, resize());
  }

 private:
  Kernel& kernel_;
  CloudProvider& cloud_;
  LoadBalancer& lb_;
  WorkerFactory& factory_;
  AutoscalerConfig config_;
  ActorRef self_;
  std::function<void(std::size_t, std::size_t, const ResizeAction&)> observer_;
};

}  // namespace hotpool
