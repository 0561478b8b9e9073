#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hotpool/kernel.hpp"
#include "hotpool/rational.hpp"
#include "hotpool/service.hpp"

namespace hotpool {

enum class ClientKind { closed, open };

struct ClientSpec {
  ClientKind kind = ClientKind::closed;
  Rational cycle{5};
  Rational task_cost{81};
  std::int64_t jobs = 10;
  /// Half-width of an optional uniform jitter on each request's cost.
  Rational cost_jitter{0};
};

struct WorkloadPhase {
  Rational start{0};
  std::int64_t count = 1;
  ClientSpec spec;
};

inline void validate(const ClientSpec& spec) {
  if (spec.cycle <= 0) throw Error("client cycle must be positive");
  if (spec.task_cost <= 0) throw Error("task cost must be positive");
  if (spec.jobs < 1) throw Error("jobs must be >= 1");
  if (spec.cost_jitter < 0 || spec.cost_jitter > spec.task_cost) throw Error("cost jitter must lie in [0, taskCost]");
}

/// Σ count × jobs over the phases.
inline std::int64_t expected_requests(const std::vector<WorkloadPhase>& phases) {
  std::int64_t total = 0;
  for (const auto& p : phases) total += p.count * p.spec.jobs;
  return total;
}

/// Draws per-request costs. With zero jitter every request costs exactly
/// `task_cost` and the generator is never touched.
class CostSampler {
 public:
  explicit CostSampler(std::uint64_t seed) : engine_(seed) {}

  Rational draw(const ClientSpec& spec) {
    if (spec.cost_jitter == 0) return spec.task_cost;
    // Uniform on a grid of 2^20 steps across [cost - jitter, cost + jitter].
    constexpr std::uint64_t steps = 1u << 20;
    Rational u = make_rational(static_cast<long>(engine_() % (steps + 1)), static_cast<long>(steps));
    return spec.task_cost - spec.cost_jitter + 2 * spec.cost_jitter * u;
  }

 private:
  std::mt19937_64 engine_;
};

/// Waits a cycle, invokes the service, waits for the answer; `jobs` times.
class ClosedClient {
 public:
  ClosedClient(Kernel& kernel, ServiceEndpoint& ep, ClientSpec spec, CostSampler& costs, std::string name)
      : kernel_(kernel), ep_(ep), spec_(std::move(spec)), costs_(costs) {
    self_ = kernel_.spawn(std::move(name));
  }

  ActorRef ref() const { return self_; }
  std::int64_t jobcount() const { return jobcount_; }

  Proc<void> run() {
    while (jobcount_ < spec_.jobs) {
      co_await kernel_.sleep(Duration(spec_.cycle));
      Future<bool> result = kernel_.send(ep_.ref(), ep_.invoke_service(costs_.draw(spec_)));
      co_await result;
      ++jobcount_;
    }
  }

 private:
  Kernel& kernel_;
  ServiceEndpoint& ep_;
  ClientSpec spec_;
  CostSampler& costs_;
  ActorRef self_;
  std::int64_t jobcount_ = 0;
};

/// Issues one request per cycle regardless of replies. Each iteration is its
/// own process that schedules the next one before awaiting its own reply.
class OpenClient {
 public:
  OpenClient(Kernel& kernel, ServiceEndpoint& ep, ClientSpec spec, CostSampler& costs, std::string name)
      : kernel_(kernel), ep_(ep), spec_(std::move(spec)), costs_(costs) {
    self_ = kernel_.spawn(std::move(name));
  }

  ActorRef ref() const { return self_; }
  std::int64_t jobcount() const { return jobcount_; }

  Proc<void> run() {
    Future<bool> result = kernel_.send(ep_.ref(), ep_.invoke_service(costs_.draw(spec_)));
    ++jobcount_;
    co_await kernel_.sleep(Duration(spec_.cycle));
    if (jobcount_ < spec_.jobs) kernel_.send(self_, run());
    co_await result;
  }

 private:
  Kernel& kernel_;
  ServiceEndpoint& ep_;
  ClientSpec spec_;
  CostSampler& costs_;
  ActorRef self_;
  std::int64_t jobcount_ = 0;
};

/// The driver actor: sleeps to each phase's start and spawns its clients.
class WorkloadDriver {
 public:
  WorkloadDriver(Kernel& kernel, ServiceEndpoint& ep, std::vector<WorkloadPhase> phases, std::uint64_t cost_seed)
      : kernel_(kernel), ep_(ep), phases_(std::move(phases)), costs_(cost_seed) {
    if (phases_.empty()) throw Error("workload needs at least one phase");
    for (std::size_t i = 0; i < phases_.size(); ++i) {
      const auto& p = phases_[i];
      if (p.start < 0) throw Error("phase start must be >= 0");
      if (p.count < 1) throw Error("phase client count must be >= 1");
      validate(p.spec);
      if (i > 0 && p.start < phases_[i - 1].start) throw Error("unsorted phases");
    }
    self_ = kernel_.spawn("workload");
  }

  ActorRef ref() const { return self_; }
  std::int64_t expected_requests() const { return hotpool::expected_requests(phases_); }
  std::size_t clients_spawned() const { return closed_.size() + open_.size(); }

  Proc<void> run() {
    for (const auto& phase : phases_) {
      Rational wait = phase.start - kernel_.now().value();
      if (wait > 0) co_await kernel_.sleep(Duration(wait));
      for (std::int64_t i = 0; i < phase.count; ++i) spawn_client(phase.spec);
    }
  }

 private:
  void spawn_client(const ClientSpec& spec) {
    const std::string name = "client-" + std::to_string(clients_spawned() + 1);
    if (spec.kind == ClientKind::closed) {
      closed_.push_back(std::make_unique<ClosedClient>(kernel_, ep_, spec, costs_, name));
      kernel_.send(closed_.back()->ref(), closed_.back()->run());
    } else {
      open_.push_back(std::make_unique<OpenClient>(kernel_, ep_, spec, costs_, name));
      kernel_.send(open_.back()->ref(), open_.back()->run());
    }
  }

  Kernel& kernel_;
  ServiceEndpoint& ep_;
  std::vector<WorkloadPhase> phases_;
  CostSampler costs_;
  ActorRef self_;
  std::vector<std::unique_ptr<ClosedClient>> closed_;
  std::vector<std::unique_ptr<OpenClient>> open_;
};

/// 30 closed clients at 50 and 150, 80 open clients at 100 and 200, ten
/// jobs each; closed cycle 5, open cycle 1.
inline std::vector<WorkloadPhase> burst_workload(Rational task_cost = Rational(81)) {
  ClientSpec closed{ClientKind::closed, Rational(5), task_cost, 10, Rational(0)};
  ClientSpec open{ClientKind::open, Rational(1), task_cost, 10, Rational(0)};
  return {
      {Rational(50), 30, closed},
      {Rational(100), 80, open},
      {Rational(150), 30, closed},
      {Rational(200), 80, open},
  };
}

}  // namespace hotpool
