#pragma once

// Deterministic cooperative-scheduling actor runtime.
//
// Every actor owns a group of processes. A process is a C++20 coroutine
// created by an asynchronous call (`Kernel::send`) and runs without
// interruption until it reaches a scheduling point: awaiting a future, a
// condition on its actor's state, a duration, or cost-annotated work on a
// resource-bearing location. The clock advances only when no process is
// ready; among ready processes the scheduler picks uniformly at random from
// a seeded PRNG, so (scenario, seed) determines the whole event trace.

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "hotpool/rational.hpp"
#include "hotpool/rng.hpp"

namespace hotpool {

class Kernel;

using ActorId = std::uint64_t;
using ProcessId = std::uint64_t;
using FutureId = std::uint64_t;

/// Handle to an actor. Id 0 is the "outside world" (no actor).
struct ActorRef {
  ActorId id = 0;
  bool valid() const { return id != 0; }
  friend auto operator<=>(const ActorRef&, const ActorRef&) = default;
};

/// A place supplying compute capacity to cost-annotated work. Actors
/// without a location live in the unbounded environment.
class Location {
 public:
  virtual ~Location() = default;
  virtual std::uint64_t location_id() const = 0;
  virtual bool active() const = 0;
  /// Starts consuming `cost` for process `pid` at the kernel's current time.
  virtual void begin_consume(Kernel& kernel, ProcessId pid, const Rational& cost) = 0;
  /// Earliest instant at which some in-progress consumption finishes.
  virtual std::optional<Time> next_completion() const = 0;
  /// Brings consumption up to `now` and wakes processes whose cost is paid.
  virtual void advance_to(Kernel& kernel, const Time& now) = 0;
};

enum class EventKind {
  spawn,
  send,
  resume,
  await_future,
  await_condition,
  sleep,
  consume,
  resolve,
  finish,
  drop,
  deadlock,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::spawn: return "spawn";
    case EventKind::send: return "send";
    case EventKind::resume: return "resume";
    case EventKind::await_future: return "await_future";
    case EventKind::await_condition: return "await_condition";
    case EventKind::sleep: return "sleep";
    case EventKind::consume: return "consume";
    case EventKind::resolve: return "resolve";
    case EventKind::finish: return "finish";
    case EventKind::drop: return "drop";
    case EventKind::deadlock: return "deadlock";
  }
  return "?";
}

struct Event {
  Time time;
  ActorId actor = 0;
  ProcessId process = 0;
  EventKind kind = EventKind::spawn;
  /// Kind-specific integer payload: target/future/wake ids.
  std::uint64_t subject = 0;
  std::string detail;

  friend bool operator==(const Event&, const Event&) = default;
};

struct Trace {
  std::vector<Event> events;
  Time final_time;
  bool deadlocked_residue = false;

  friend bool operator==(const Trace&, const Trace&) = default;

  /// Newline-delimited `time,actor,event,detail` records.
  std::string to_text() const {
    std::ostringstream os;
    for (const auto& e : events) {
      os << e.time.value().get_str() << ',' << e.actor << ',' << to_string(e.kind) << ",p" << e.process;
      if (e.subject != 0) os << " #" << e.subject;
      if (!e.detail.empty()) os << ' ' << e.detail;
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {

template <class T>
using stored_t = std::conditional_t<std::is_void_v<T>, std::monostate, T>;

struct FutureCore {
  FutureId id = 0;
  bool resolved = false;
  std::vector<ProcessId> waiters;
};

template <class T>
struct FutureState : FutureCore {
  std::optional<stored_t<T>> value;
};

struct PromiseBase {
  Kernel* kernel = nullptr;
  ProcessId pid = 0;
  std::exception_ptr error;
};

}  // namespace detail

/// Single-assignment result of an asynchronous call.
template <class T>
class Future {
 public:
  Future() = default;
  Future(Kernel* kernel, std::shared_ptr<detail::FutureState<T>> state)
      : kernel_(kernel), state_(std::move(state)) {}

  FutureId id() const { return state_->id; }
  bool resolved() const { return state_ && state_->resolved; }

  /// Value of a resolved future.
  const detail::stored_t<T>& get() const {
    if (!resolved()) throw Error("get on unresolved future");
    return *state_->value;
  }

  auto operator co_await() const;

 private:
  Kernel* kernel_ = nullptr;
  std::shared_ptr<detail::FutureState<T>> state_;
};

template <class T>
class Proc;

namespace detail {

template <class T>
struct PromiseCommon : PromiseBase {
  std::shared_ptr<FutureState<T>> future;

  std::suspend_always initial_suspend() noexcept { return {}; }
  std::suspend_always final_suspend() noexcept { return {}; }
  void unhandled_exception() { error = std::current_exception(); }
};

template <class T>
struct ValuePromise : PromiseCommon<T> {
  Proc<T> get_return_object();
  void return_value(T v);
};

struct VoidPromise : PromiseCommon<void> {
  Proc<void> get_return_object();
  void return_void();
};

}  // namespace detail

/// A not-yet-started process body. Hand it to `Kernel::send` to schedule it.
template <class T>
class Proc {
 public:
  using promise_type = std::conditional_t<std::is_void_v<T>, detail::VoidPromise, detail::ValuePromise<T>>;
  using handle_type = std::coroutine_handle<promise_type>;

  explicit Proc(handle_type h) : h_(h) {}
  Proc(Proc&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Proc& operator=(Proc&& o) noexcept {
    if (this != &o) {
      reset();
      h_ = std::exchange(o.h_, {});
    }
    return *this;
  }
  Proc(const Proc&) = delete;
  Proc& operator=(const Proc&) = delete;
  ~Proc() { reset(); }

  handle_type release() { return std::exchange(h_, {}); }

 private:
  void reset() {
    if (h_) h_.destroy();
    h_ = {};
  }
  handle_type h_;
};

enum class ProcessStatus { ready, running, blocked_future, blocked_condition, sleeping, consuming };

/// Which condition waiters of an actor become ready when their predicates
/// hold: all of them (the scheduler then picks at random), or only the one
/// that has waited longest.
enum class ConditionWake { any, oldest_first };

struct KernelOptions {
  bool record_trace = true;
};

class Kernel {
 public:
  explicit Kernel(std::uint64_t seed, KernelOptions options = {}) : rng_(seed), options_(options) {}
  Kernel(const Kernel&) = delete;
  Kernel& operator=(const Kernel&) = delete;

  ~Kernel() {
    for (auto& p : processes_)
      if (p) p->handle.destroy();
  }

  const Time& now() const { return now_; }

  /// Registers an actor at `location` (nullptr = unbounded environment).
  ActorRef spawn(std::string name, Location* location = nullptr, ConditionWake wake = ConditionWake::any) {
    if (location != nullptr && !location->active()) throw Error("dead location");
    actors_.push_back(ActorRecord{std::move(name), location, wake, {}});
    ActorRef ref{actors_.size()};
    record(EventKind::spawn, ref.id, current_pid(), location != nullptr ? location->location_id() : 0, [&] {
      return actors_.back().name;
    });
    return ref;
  }

  /// Spawns an actor and schedules its run behavior at the current instant.
  ActorRef spawn(std::string name, Location* location, std::function<Proc<void>(ActorRef)> behavior) {
    ActorRef ref = spawn(std::move(name), location);
    send(ref, behavior(ref));
    return ref;
  }

  /// Location of an actor, or nullptr for the unbounded environment.
  Location* this_dc(ActorRef actor) const { return record_of(actor).location; }

  const std::string& name_of(ActorRef actor) const { return record_of(actor).name; }

  /// Asynchronous call: schedules `body` as a new process of `target` and
  /// returns its future immediately. Calls to an actor whose location has
  /// been shut down are dropped and their future never resolves.
  template <class T>
  Future<T> send(ActorRef target, Proc<T> body) {
    auto state = std::make_shared<detail::FutureState<T>>();
    state->id = ++last_future_;
    auto handle = body.release();
    if (!handle) throw Error("send of an empty process");
    const ActorRecord& rec = record_of(target);
    auto& promise = handle.promise();
    promise.kernel = this;
    promise.future = state;

    if (rec.location != nullptr && !rec.location->active()) {
      record(EventKind::drop, target.id, current_pid(), state->id, {});
      handle.destroy();
      return Future<T>(this, std::move(state));
    }

    auto proc = std::make_unique<Process>();
    proc->id = processes_.size() + 1;
    proc->owner = target.id;
    proc->handle = handle;
    proc->promise = &promise;
    promise.pid = proc->id;
    Process* raw = proc.get();
    processes_.push_back(std::move(proc));
    ++live_processes_;
    record(EventKind::send, target.id, current_pid(), raw->id, [&] { return "future " + std::to_string(state->id); });
    make_ready(raw);
    return Future<T>(this, std::move(state));
  }

  /// Suspends the current process for `min` time units. `max` is accepted
  /// for interface fidelity; the process resumes at now + min.
  auto sleep(Duration min, Duration max) {
    if (min > max) throw Error("bad duration");
    struct Awaiter {
      Kernel* k;
      Duration d;
      bool await_ready() const noexcept { return false; }
      void await_suspend(std::coroutine_handle<>) { k->suspend_sleep(d); }
      void await_resume() const noexcept {}
    };
    return Awaiter{this, std::move(min)};
  }
  auto sleep(Duration d) { return sleep(d, d); }

  /// Suspends the current process until `pred` (over its own actor's
  /// state) holds at a scheduling point of that actor.
  auto until(std::function<bool()> pred) {
    struct Awaiter {
      Kernel* k;
      std::function<bool()> pred;
      bool await_ready() { return pred(); }
      void await_suspend(std::coroutine_handle<>) { k->suspend_condition(std::move(pred)); }
      void await_resume() const noexcept {}
    };
    return Awaiter{this, std::move(pred)};
  }

  /// Cost-annotated work on the current actor's location.
  auto consume(Rational cost) {
    if (cost < 0) throw Error("negative cost");
    Location* loc = this_dc(ActorRef{running().owner});
    if (loc != nullptr && !loc->active()) throw Error("dead location");
    struct Awaiter {
      Kernel* k;
      Location* loc;
      Rational cost;
      bool await_ready() const { return loc == nullptr || cost == 0; }
      void await_suspend(std::coroutine_handle<>) { k->suspend_consume(*loc, cost); }
      void await_resume() const noexcept {}
    };
    return Awaiter{this, loc, std::move(cost)};
  }

  /// Called by a location when a consumer's cost has been fully paid.
  void wake(ProcessId pid) {
    Process& p = process(pid);
    if (p.status != ProcessStatus::consuming) throw Error("wake of a process that is not consuming");
    make_ready(&p);
  }

  /// Called by a location that has started work, so its completions are
  /// considered when the clock advances.
  void mark_busy(Location& loc) { busy_.emplace(loc.location_id(), &loc); }

  /// Invoked with each integer instant t once the kernel is quiescent at t.
  void on_tick(std::function<void(std::int64_t)> fn) { tick_observers_.push_back(std::move(fn)); }

  /// Runs the two-phase loop until the clock would pass `horizon` or no
  /// future event exists.
  Trace run_until(const Time& horizon) {
    if (horizon.value() <= 0) throw Error("horizon must be positive");
    for (;;) {
      while (!ready_.empty()) step();
      tick_if_due(horizon);

      std::optional<Time> next = next_event_time();
      if (!next) {
        if (blocked_count() > 0) {
          trace_.deadlocked_residue = true;
          record(EventKind::deadlock, 0, 0, blocked_count(), {});
        }
        break;
      }
      while (horizon.value() >= next_tick_ && next->value() > next_tick_) {
        now_ = Time(next_tick_);
        tick_if_due(horizon);
      }
      if (*next > horizon) break;
      now_ = *next;

      for (auto it = busy_.begin(); it != busy_.end();) {
        it->second->advance_to(*this, now_);
        if (!it->second->next_completion())
          it = busy_.erase(it);
        else
          ++it;
      }
      while (!sleepers_.empty() && sleepers_.top().wake == now_) {
        ProcessId pid = sleepers_.top().pid;
        sleepers_.pop();
        make_ready(&process(pid));
      }
    }
    trace_.final_time = now_;
    return trace_;
  }

  const Trace& trace() const { return trace_; }

  /// Processes suspended on a future or a condition.
  std::size_t blocked_count() const { return blocked_; }
  std::size_t live_processes() const { return live_processes_; }
  std::size_t actor_count() const { return actors_.size(); }

  SchedulerRng& rng() { return rng_; }

 private:
  template <class T>
  friend class Future;
  friend struct detail::VoidPromise;
  template <class T>
  friend struct detail::ValuePromise;

  struct Process {
    ProcessId id = 0;
    ActorId owner = 0;
    std::coroutine_handle<> handle;
    detail::PromiseBase* promise = nullptr;
    ProcessStatus status = ProcessStatus::ready;
    std::function<bool()> condition;
    std::size_t ready_slot = 0;
    detail::FutureCore* awaited = nullptr;
  };

  struct ActorRecord {
    std::string name;
    Location* location = nullptr;
    ConditionWake wake = ConditionWake::any;
    std::vector<ProcessId> condition_waiters;
  };

  struct Sleeper {
    Time wake;
    std::uint64_t seq;
    ProcessId pid;
    bool operator>(const Sleeper& o) const {
      if (wake != o.wake) return wake > o.wake;
      return seq > o.seq;
    }
  };

  const ActorRecord& record_of(ActorRef a) const {
    if (a.id == 0 || a.id > actors_.size()) throw Error("unknown actor " + std::to_string(a.id));
    return actors_[a.id - 1];
  }
  ActorRecord& record_of(ActorRef a) { return const_cast<ActorRecord&>(std::as_const(*this).record_of(a)); }

  Process& process(ProcessId pid) {
    Process* p = pid == 0 || pid > processes_.size() ? nullptr : processes_[pid - 1].get();
    if (p == nullptr) throw Error("unknown process " + std::to_string(pid));
    return *p;
  }

  Process& running() {
    if (current_ == nullptr) throw Error("scheduling point outside a process");
    return *current_;
  }

  ProcessId current_pid() const { return current_ != nullptr ? current_->id : 0; }

  template <class DetailFn>
  void record(EventKind kind, ActorId actor, ProcessId pid, std::uint64_t subject, DetailFn&& detail) {
    if (!options_.record_trace) return;
    Event e{now_, actor, pid, kind, subject, {}};
    if constexpr (std::is_invocable_v<DetailFn>) e.detail = detail();
    trace_.events.push_back(std::move(e));
  }
  void record(EventKind kind, ActorId actor, ProcessId pid, std::uint64_t subject, std::nullptr_t) {
    record(kind, actor, pid, subject, [] { return std::string(); });
  }

  void make_ready(Process* p) {
    p->status = ProcessStatus::ready;
    p->ready_slot = ready_.size();
    ready_.push_back(p);
  }

  void remove_ready(Process* p) {
    std::size_t slot = p->ready_slot;
    ready_[slot] = ready_.back();
    ready_[slot]->ready_slot = slot;
    ready_.pop_back();
  }

  void step() {
    Process* p = ready_[rng_.pick(ready_.size())];
    remove_ready(p);
    if (p->condition) {
      if (!p->condition()) {
        p->status = ProcessStatus::blocked_condition;
        return;
      }
      auto& waiters = record_of(ActorRef{p->owner}).condition_waiters;
      std::erase(waiters, p->id);
      p->condition = nullptr;
      --blocked_;
    }
    p->status = ProcessStatus::running;
    current_ = p;
    record(EventKind::resume, p->owner, p->id, 0, nullptr);
    p->handle.resume();
    current_ = nullptr;

    const ActorId owner = p->owner;
    if (p->handle.done()) {
      std::exception_ptr error = p->promise->error;
      record(EventKind::finish, owner, p->id, 0, nullptr);
      p->handle.destroy();
      processes_[p->id - 1].reset();
      --live_processes_;
      if (error) std::rethrow_exception(error);
    }
    reevaluate_conditions(owner);
  }

  void reevaluate_conditions(ActorId owner) {
    const ActorRecord& actor = record_of(ActorRef{owner});
    const bool oldest_only = actor.wake == ConditionWake::oldest_first;
    bool woke_one = false;
    for (ProcessId pid : actor.condition_waiters) {
      Process& w = process(pid);
      bool holds = !woke_one && w.condition();
      if (holds && oldest_only) woke_one = true;
      if (holds && w.status == ProcessStatus::blocked_condition) {
        make_ready(&w);
      } else if (!holds && w.status == ProcessStatus::ready) {
        remove_ready(&w);
        w.status = ProcessStatus::blocked_condition;
      }
    }
  }

  void tick_if_due(const Time& horizon) {
    if (!is_integer(now_.value()) || now_.value() != next_tick_ || now_ > horizon) return;
    for (auto& fn : tick_observers_) fn(next_tick_);
    next_tick_ += 1;
  }

  std::optional<Time> next_event_time() const {
    std::optional<Time> next;
    if (!sleepers_.empty()) next = sleepers_.top().wake;
    for (const auto& [id, loc] : busy_) {
      auto c = loc->next_completion();
      if (c && (!next || *c < *next)) next = c;
    }
    return next;
  }

  void suspend_sleep(const Duration& d) {
    Process& p = running();
    record(EventKind::sleep, p.owner, p.id, 0, [&] { return d.value().get_str(); });
    if (d.value() == 0) {
      make_ready(&p);
      return;
    }
    p.status = ProcessStatus::sleeping;
    sleepers_.push(Sleeper{now_ + d, ++sleep_seq_, p.id});
  }

  void suspend_condition(std::function<bool()> pred) {
    Process& p = running();
    record(EventKind::await_condition, p.owner, p.id, 0, nullptr);
    p.status = ProcessStatus::blocked_condition;
    p.condition = std::move(pred);
    record_of(ActorRef{p.owner}).condition_waiters.push_back(p.id);
    ++blocked_;
  }

  void suspend_future(detail::FutureCore& fut) {
    Process& p = running();
    record(EventKind::await_future, p.owner, p.id, fut.id, nullptr);
    p.status = ProcessStatus::blocked_future;
    p.awaited = &fut;
    fut.waiters.push_back(p.id);
    ++blocked_;
  }

  void suspend_consume(Location& loc, const Rational& cost) {
    Process& p = running();
    record(EventKind::consume, p.owner, p.id, loc.location_id(), [&] { return cost.get_str(); });
    p.status = ProcessStatus::consuming;
    loc.begin_consume(*this, p.id, cost);
    mark_busy(loc);
  }

  void resolve(detail::FutureCore& fut) {
    if (fut.resolved) throw Error("future resolved twice");
    fut.resolved = true;
    Process& p = running();
    record(EventKind::resolve, p.owner, p.id, fut.id, nullptr);
    for (ProcessId pid : fut.waiters) {
      Process& w = process(pid);
      w.awaited = nullptr;
      --blocked_;
      make_ready(&w);
    }
    fut.waiters.clear();
  }

  SchedulerRng rng_;
  KernelOptions options_;
  Time now_;
  std::int64_t next_tick_ = 0;
  std::vector<ActorRecord> actors_;
  std::vector<std::unique_ptr<Process>> processes_;
  std::size_t live_processes_ = 0;
  std::size_t blocked_ = 0;
  std::vector<Process*> ready_;
  std::priority_queue<Sleeper, std::vector<Sleeper>, std::greater<>> sleepers_;
  std::uint64_t sleep_seq_ = 0;
  std::map<std::uint64_t, Location*> busy_;
  std::vector<std::function<void(std::int64_t)>> tick_observers_;
  FutureId last_future_ = 0;
  Trace trace_;
  Process* current_ = nullptr;
};

template <class T>
auto Future<T>::operator co_await() const {
  struct Awaiter {
    Kernel* k;
    std::shared_ptr<detail::FutureState<T>> st;
    bool await_ready() const noexcept { return st->resolved; }
    void await_suspend(std::coroutine_handle<>) { k->suspend_future(*st); }
    T await_resume() const {
      if constexpr (!std::is_void_v<T>) return *st->value;
    }
  };
  return Awaiter{kernel_, state_};
}

namespace detail {

template <class T>
Proc<T> ValuePromise<T>::get_return_object() {
  return Proc<T>(std::coroutine_handle<ValuePromise<T>>::from_promise(*this));
}

template <class T>
void ValuePromise<T>::return_value(T v) {
  this->future->value.emplace(std::move(v));
  this->kernel->resolve(*this->future);
}

inline Proc<void> VoidPromise::get_return_object() {
  return Proc<void>(std::coroutine_handle<VoidPromise>::from_promise(*this));
}

inline void VoidPromise::return_void() {
  future->value.emplace();
  kernel->resolve(*future);
}

}  // namespace detail

}  // namespace hotpool
