#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "prioheap/collector.hpp"
#include "prioheap/heap.hpp"
#include "prioheap/prio_space.hpp"

namespace prioheap {

// Every touch gets the next value of a per-cache counter.
struct LruPolicy {};

/// GreedyDual-Size: H = aging + miss_cost / size, stored as fixed point
/// round(scale * H). Aging is raised to the largest H evicted by a
/// collection, so survivors age relative to new entries.
struct GreedyDualPolicy {
  double aging = 0.0;
  double scale = 65536.0;
};

// Logical time shared by every cache of a soft-reference emulation.
struct AccessClock {
  Priority now = 0;
  Priority tick() { return ++now; }
};

// Priority is the global last-access timestamp.
struct GlobalClockPolicy {
  std::shared_ptr<AccessClock> clock;
};

using Policy = std::variant<LruPolicy, GreedyDualPolicy, GlobalClockPolicy>;

inline double greedy_dual_value(const GreedyDualPolicy& p, double miss_cost, Bytes size) {
  return p.aging + miss_cost / static_cast<double>(std::max<Bytes>(size, 1));
}

inline Priority greedy_dual_priority(const GreedyDualPolicy& p, double miss_cost, Bytes size) {
  return static_cast<Priority>(std::llround(p.scale * greedy_dual_value(p, miss_cost, size)));
}

inline void greedy_dual_on_eviction(GreedyDualPolicy& p, double evicted_h) {
  p.aging = std::max(p.aging, evicted_h);
}

/// One priority space shared by several caches, with priorities taken from
/// a single access clock. Models a runtime-wide LRU soft reference policy.
struct SoftRefDomain {
  PrioSpace* space = nullptr;
  std::shared_ptr<AccessClock> clock;
};

inline SoftRefDomain softref_emulation(Collector& collector, double free_fraction,
                                       EvictionMode mode = EvictionMode::kStrict) {
  return SoftRefDomain{&collector.new_space(FreeFraction{free_fraction}, mode),
                       std::make_shared<AccessClock>()};
}

/// A space-aware cache. Values live behind priority references so the
/// collector measures and evicts them; entries the collector cleared are
/// dropped from the map on the first access after a collection.
template <class Key, class Hash = std::hash<Key>>
class Sache {
 public:
  Sache(Heap& heap, Collector& collector, BoundSpec bound, Policy policy = LruPolicy{},
        EvictionMode mode = EvictionMode::kStrict)
      : heap_(&heap),
        collector_(&collector),
        space_(&collector.new_space(bound, mode)),
        policy_(std::move(policy)),
        seen_epoch_(collector.epoch()) {}

  // A Sache over the shared space of a soft reference emulation.
  Sache(Heap& heap, Collector& collector, const SoftRefDomain& domain)
      : heap_(&heap),
        collector_(&collector),
        space_(domain.space),
        policy_(GlobalClockPolicy{domain.clock}),
        seen_epoch_(collector.epoch()) {}

  Sache(const Sache&) = delete;
  Sache& operator=(const Sache&) = delete;
  Sache(Sache&&) = default;
  Sache& operator=(Sache&&) = default;

  ObjectRef get(const Key& key) {
    refresh();
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    const ObjectRef value = it->second.ref.get();
    if (!value) {
      drop(it);
      return std::nullopt;
    }
    touch(it->second);
    return value;
  }

  /// `size_hint` stands in for the entry's footprint until a collection
  /// measures it; 0 uses the root object's request.
  void put(const Key& key, ObjectId value, double miss_cost = 1.0, Bytes size_hint = 0) {
    if (!heap_->alive(value)) {
      throw DanglingReferent("cache value " + std::to_string(value.value) + " is not alive");
    }
    refresh();
    auto it = map_.find(key);
    if (it != map_.end()) {
      if (it->second.ref.get() == ObjectRef(value)) {
        it->second.miss_cost = miss_cost;
        touch(it->second);
        return;
      }
      drop(it);
    }
    Entry entry{PrioReference{}, miss_cost, 0.0,
                size_hint > 0 ? size_hint : heap_->object(value).requested};
    entry.ref = space_->new_ref(*heap_, value, next_priority(entry));
    map_.emplace(key, std::move(entry));
  }

  ObjectRef remove(const Key& key) {
    refresh();
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    const ObjectRef value = it->second.ref.get();
    drop(it);
    return value;
  }

  /// Drops entries cleared by the collector since the last call. Returns
  /// the number dropped; a no-op when no collection has happened since.
  std::size_t update() {
    last_evicted_.clear();
    if (collector_->epoch() == seen_epoch_) return 0;
    seen_epoch_ = collector_->epoch();

    double max_evicted_h = 0.0;
    bool evicted_any = false;
    for (auto it = map_.begin(); it != map_.end();) {
      Entry& e = it->second;
      if (!e.ref.get()) {
        max_evicted_h = std::max(max_evicted_h, e.h);
        evicted_any = true;
        last_evicted_.push_back(it->first);
        space_->remove_ref(e.ref);
        it = map_.erase(it);
        continue;
      }
      if (e.ref.has_gc_size()) {
        const Bytes measured = e.ref.get_gc_size();
        if (measured > 0) e.size = measured;
      }
      ++it;
    }
    if (evicted_any) {
      if (auto* gd = std::get_if<GreedyDualPolicy>(&policy_)) {
        greedy_dual_on_eviction(*gd, max_evicted_h);
      }
    }
    return last_evicted_.size();
  }

  // Keys dropped by the most recent update().
  const std::vector<Key>& last_evicted() const noexcept { return last_evicted_; }

  bool contains(const Key& key) const { return map_.contains(key); }
  std::size_t size() const noexcept { return map_.size(); }
  Priority highest_priority() const noexcept { return highest_priority_; }
  const Policy& policy() const noexcept { return policy_; }
  PrioSpace& space() noexcept { return *space_; }
  const PrioSpace& space() const noexcept { return *space_; }

  // Reference backing a key, for inspection.
  std::optional<PrioReference> reference(const Key& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second.ref;
  }

  template <class F>
  void for_each(F&& f) const {
    for (const auto& [key, entry] : map_) f(key, entry.ref);
  }

 private:
  struct Entry {
    PrioReference ref;
    double miss_cost = 0.0;
    double h = 0.0;  // GreedyDual value at the last touch
    Bytes size = 0;  // last measured footprint, or the hint before any
  };
  using Map = std::unordered_map<Key, Entry, Hash>;

  void refresh() {
    if (collector_->epoch() != seen_epoch_) update();
  }

  Priority next_priority(Entry& e) {
    Priority p = 0;
    if (std::holds_alternative<LruPolicy>(policy_)) {
      p = ++highest_priority_;
    } else if (auto* clock = std::get_if<GlobalClockPolicy>(&policy_)) {
      p = clock->clock->tick();
    } else {
      auto& gd = std::get<GreedyDualPolicy>(policy_);
      e.h = greedy_dual_value(gd, e.miss_cost, e.size);
      p = greedy_dual_priority(gd, e.miss_cost, e.size);
    }
    highest_priority_ = std::max(highest_priority_, p);
    return p;
  }

  void touch(Entry& e) { e.ref.set_priority(next_priority(e)); }

  void drop(typename Map::iterator it) {
    space_->remove_ref(it->second.ref);
    map_.erase(it);
  }

  Heap* heap_;
  Collector* collector_;
  PrioSpace* space_;
  Policy policy_;
  Map map_;
  Priority highest_priority_ = 0;
  std::uint64_t seen_epoch_;
  std::vector<Key> last_evicted_;
};

}  // namespace prioheap
