#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hotpool/kernel.hpp"
#include "hotpool/rational.hpp"

namespace hotpool {

enum class ResourceKind { speed, memory, bandwidth };

using ResourceMap = std::map<ResourceKind, Rational>;

/// A virtual machine. Capacity is supplied as a fluid: `speed` units per
/// time interval, shared equally among the tasks consuming at any instant.
class DeploymentComponent final : public Location {
 public:
  DeploymentComponent(std::uint64_t id, Rational speed, Time launched_at)
      : id_(id), speed_(std::move(speed)), launched_at_(launched_at), last_update_(launched_at) {
    if (speed_ <= 0) throw Error("bad capacity");
  }

  std::uint64_t location_id() const override { return id_; }
  bool active() const override { return !shutdown_at_.has_value(); }
  const Rational& speed() const { return speed_; }
  const Time& launched_at() const { return launched_at_; }
  const std::optional<Time>& shutdown_at() const { return shutdown_at_; }

  bool busy() const { return !tasks_.empty(); }
  std::size_t task_count() const { return tasks_.size(); }

  /// Active at instant b: launched no later than b and not shut down by b.
  bool billable_at(const Rational& b) const {
    return launched_at_.value() <= b && (!shutdown_at_ || shutdown_at_->value() > b);
  }

  void begin_consume(Kernel& kernel, ProcessId pid, const Rational& cost) override {
    if (!active()) throw Error("dead location");
    settle(kernel.now());
    tasks_.push_back(Task{pid, cost});
  }

  std::optional<Time> next_completion() const override {
    if (tasks_.empty()) return std::nullopt;
    const Rational& least =
        std::min_element(tasks_.begin(), tasks_.end(), [](const Task& a, const Task& b) {
          return a.remaining < b.remaining;
        })->remaining;
    Rational n(static_cast<long>(tasks_.size()));
    return Time(last_update_.value() + least * n / speed_);
  }

  void advance_to(Kernel& kernel, const Time& now) override {
    settle(now);
    auto done = std::stable_partition(tasks_.begin(), tasks_.end(), [](const Task& t) { return t.remaining > 0; });
    std::vector<Task> finished(done, tasks_.end());
    tasks_.erase(done, tasks_.end());
    for (const Task& t : finished) kernel.wake(t.pid);
  }

  /// Remaining cost of each in-progress task, in start order.
  std::vector<Rational> remaining_costs() const {
    std::vector<Rational> out;
    for (const auto& t : tasks_) out.push_back(t.remaining);
    return out;
  }

 private:
  friend class CloudProvider;

  struct Task {
    ProcessId pid;
    Rational remaining;
  };

  // Charges every task its equal share of the capacity supplied since the
  // last update.
  void settle(const Time& now) {
    if (!tasks_.empty()) {
      Rational share = speed_ * (now - last_update_) / Rational(static_cast<long>(tasks_.size()));
      for (auto& t : tasks_) {
        t.remaining -= share;
        if (t.remaining < 0) throw Error("over-consumption on location " + std::to_string(id_));
      }
    }
    last_update_ = now;
  }

  std::uint64_t id_;
  Rational speed_;
  Time launched_at_;
  std::optional<Time> shutdown_at_;
  Time last_update_;
  std::vector<Task> tasks_;
};

struct BillingPolicy {
  Rational price_per_machine{50};
  Rational period{5};
};

/// Instance lifecycle plus periodic per-machine billing. Launch and shutdown
/// take effect at the kernel's current instant with no boot delay.
class CloudProvider {
 public:
  explicit CloudProvider(Kernel& kernel, BillingPolicy billing = {}) : kernel_(kernel), billing_(std::move(billing)) {
    if (billing_.price_per_machine <= 0) throw Error("billing price must be positive");
    if (billing_.period <= 0) throw Error("billing period must be positive");
  }
  CloudProvider(const CloudProvider&) = delete;
  CloudProvider& operator=(const CloudProvider&) = delete;

  DeploymentComponent& launch_instance(const ResourceMap& capacity) {
    for (const auto& [kind, amount] : capacity)
      if (kind != ResourceKind::speed) throw Error("unsupported resource");
    auto it = capacity.find(ResourceKind::speed);
    if (it == capacity.end() || it->second <= 0) throw Error("bad capacity");
    instances_.push_back(std::make_unique<DeploymentComponent>(instances_.size() + 1, it->second, kernel_.now()));
    ++active_;
    return *instances_.back();
  }

  /// False when `dc` is already down or still has work in progress.
  bool shutdown_instance(DeploymentComponent& dc) {
    if (!dc.active() || dc.busy()) return false;
    dc.shutdown_at_ = kernel_.now();
    --active_;
    return true;
  }

  /// Price times the number of billable machines, summed over the boundaries
  /// period, 2*period, ... that are <= t.
  Rational accumulated_cost(const Time& t) const {
    Rational total(0);
    mpz_class boundaries = floor_of(t.value() / billing_.period);
    for (mpz_class k = 1; k <= boundaries; ++k) {
      Rational b = billing_.period * Rational(k);
      long n = std::count_if(instances_.begin(), instances_.end(), [&](const auto& dc) { return dc->billable_at(b); });
      total += billing_.price_per_machine * Rational(n);
    }
    return total;
  }

  std::size_t active_count() const { return active_; }
  const std::vector<std::unique_ptr<DeploymentComponent>>& instances() const { return instances_; }
  const BillingPolicy& billing() const { return billing_; }

 private:
  Kernel& kernel_;
  BillingPolicy billing_;
  std::vector<std::unique_ptr<DeploymentComponent>> instances_;
  std::size_t active_ = 0;
};

/// The deployment component an actor lives on, or nullptr for the
/// unbounded environment.
inline DeploymentComponent* this_dc(const Kernel& kernel, ActorRef actor) {
  return dynamic_cast<DeploymentComponent*>(kernel.this_dc(actor));
}

}  // namespace hotpool
