#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "prioheap/heap.hpp"
#include "prioheap/prio_space.hpp"
#include "prioheap/size_query.hpp"

namespace prioheap {

struct SpaceStats {
  Bytes bound = 0;
  // Accounted running sum of the retained entries; never includes the
  // partially marked prefix of an abandoned entry.
  Bytes retained_bytes = 0;
  std::size_t retained_entries = 0;
  // Bytes reclaimed by this collection that were reachable from evicted or
  // abandoned entries of this space.
  Bytes evicted_bytes = 0;
  std::size_t evicted_entries = 0;
  bool abandoned = false;
  // Marked prefix of the abandoned entry; unreachable after fixup and
  // reclaimed by the next collection.
  Bytes carryover_bytes = 0;
};

struct CollectionStats {
  std::uint64_t gc_index = 0;
  std::uint64_t marked_objects = 0;
  Bytes marked_bytes = 0;
  Bytes freed_bytes = 0;
  Bytes live_before = 0;
  // Root closure size: live data outside every space and query (L).
  Bytes non_space_live_bytes = 0;
  // Per-phase marking work, in bytes.
  Bytes space_marked_bytes = 0;
  Bytes query_marked_bytes = 0;
  std::vector<SpaceStats> spaces;

  bool abandoned() const {
    for (const SpaceStats& s : spaces) {
      if (s.abandoned) return true;
    }
    return false;
  }
};

namespace detail {

struct ClosureResult {
  Bytes bytes = 0;
  bool complete = true;
};

// Marks everything newly reachable from `start` and sums the allocated size
// of each object it marks. The start is always expanded, even when already
// marked, since a premarked object reached by the root closure was not
// traversed. With a limit, marking stops before the sum would exceed it.
inline ClosureResult mark_closure(Heap& heap, ObjectId start, std::optional<Bytes> limit,
                                  std::vector<ObjectId>* marked_out = nullptr) {
  ClosureResult result;
  std::vector<ObjectId> stack;
  auto claim = [&](ObjectId o) {
    const Bytes size = heap.object(o).allocated;
    if (limit && result.bytes + size > *limit) {
      result.complete = false;
      return false;
    }
    heap.set_mark(o, Mark::kMarked);
    result.bytes += size;
    if (marked_out) marked_out->push_back(o);
    return true;
  };

  if (heap.mark(start) != Mark::kMarked && !claim(start)) return result;
  stack.push_back(start);
  while (!stack.empty()) {
    const ObjectId o = stack.back();
    stack.pop_back();
    for (const ObjectRef& child : heap.object(o).slots) {
      if (!child || heap.mark(*child) == Mark::kMarked) continue;
      if (!claim(*child)) return result;
      stack.push_back(*child);
    }
  }
  return result;
}

}  // namespace detail

/// Phase 1: turns a bound spec into bytes. `live_non_space` is the root
/// closure size, only consulted by free-fraction and adaptive bounds.
inline Bytes resolve_bound(const BoundSpec& spec, const Heap& heap, Bytes live_non_space) {
  const Bytes capacity = heap.capacity();
  if (const auto* b = std::get_if<FixedBound>(&spec)) return b->bytes;
  if (const auto* b = std::get_if<HeapFraction>(&spec)) {
    return static_cast<Bytes>(std::llround(b->fraction * static_cast<double>(capacity)));
  }
  if (const auto* b = std::get_if<FreeFraction>(&spec)) {
    const Bytes free = capacity > live_non_space ? capacity - live_non_space : 0;
    return static_cast<Bytes>(std::llround(b->fraction * static_cast<double>(free)));
  }
  const Bytes reserve = std::get<AdaptiveReserve>(spec).reserve;
  const Bytes used = live_non_space + reserve;
  return capacity > used ? capacity - used : 0;
}

/// Phase 2: marks every referent and every query root, and nothing else.
inline void premark(Heap& heap, std::span<PrioSpace* const> spaces,
                    std::span<QueryQueue* const> queues) {
  auto premark_one = [&heap](ObjectId o) {
    if (heap.alive(o) && heap.mark(o) == Mark::kNone) heap.set_mark(o, Mark::kPremarked);
  };
  for (PrioSpace* space : spaces) {
    space->for_each_in_order([&](RefId, RefRecord& rec) {
      rec.outcome = RefOutcome::kNone;
      if (rec.referent) premark_one(*rec.referent);
    });
  }
  for (QueryQueue* queue : queues) {
    queue->for_each([&](FutureId, GcSizeFuture& f) { premark_one(f.query); });
  }
}

/// Phase 3: marks the closure of the roots. Premarked objects reached from a
/// root are marked but not expanded; roots themselves are always expanded.
/// Returns the total allocated size of everything this phase marked.
inline Bytes root_closure(Heap& heap) {
  Bytes live = 0;
  std::vector<ObjectId> stack;
  for (ObjectId root : heap.roots()) {
    if (heap.mark(root) != Mark::kMarked) {
      heap.set_mark(root, Mark::kMarked);
      live += heap.object(root).allocated;
    }
    stack.push_back(root);
  }
  while (!stack.empty()) {
    const ObjectId o = stack.back();
    stack.pop_back();
    for (const ObjectRef& child : heap.object(o).slots) {
      if (!child) continue;
      const Mark m = heap.mark(*child);
      if (m == Mark::kMarked) continue;
      heap.set_mark(*child, Mark::kMarked);
      live += heap.object(*child).allocated;
      if (m == Mark::kNone) stack.push_back(*child);
    }
  }
  return live;
}

/// Phase 4: bounded marking of one space in priority order.
///
/// Each reference's closure charges only objects not marked before it. In
/// strict mode the entry during which the running sum would exceed the bound
/// is abandoned with size 0 and marking stops; in entry-boundary mode that
/// entry is completed and kept. Later references are evicted and their
/// referents' premarks rescinded. Referents of evicted and abandoned entries
/// (plus the abandoned prefix) are appended to `evicted_roots` if given.
inline SpaceStats prioritized_closure(Heap& heap, PrioSpace& space, Bytes bound,
                                      std::vector<ObjectId>* evicted_roots = nullptr) {
  SpaceStats stats;
  stats.bound = bound;
  bool stopped = false;
  const bool strict = space.eviction_mode() == EvictionMode::kStrict;

  auto evict = [&](RefRecord& rec, RefOutcome outcome) {
    rec.outcome = outcome;
    rec.gc_size = 0;
    ++stats.evicted_entries;
    if (heap.mark(*rec.referent) == Mark::kPremarked) heap.set_mark(*rec.referent, Mark::kNone);
    if (evicted_roots) evicted_roots->push_back(*rec.referent);
  };

  space.for_each_in_order([&](RefId, RefRecord& rec) {
    rec.fresh = true;
    if (!rec.referent) {
      rec.gc_size = 0;
      return;
    }
    if (stopped) {
      evict(rec, RefOutcome::kEvicted);
      return;
    }
    if (strict) {
      std::vector<ObjectId> prefix;
      const auto res =
          detail::mark_closure(heap, *rec.referent, bound - stats.retained_bytes, &prefix);
      if (!res.complete) {
        stopped = true;
        stats.abandoned = true;
        stats.carryover_bytes = res.bytes;
        evict(rec, RefOutcome::kAbandoned);
        if (evicted_roots) evicted_roots->insert(evicted_roots->end(), prefix.begin(), prefix.end());
        return;
      }
      rec.gc_size = res.bytes;
      stats.retained_bytes += res.bytes;
    } else {
      const auto res = detail::mark_closure(heap, *rec.referent, std::nullopt);
      rec.gc_size = res.bytes;
      stats.retained_bytes += res.bytes;
      if (stats.retained_bytes > bound) stopped = true;
    }
    rec.outcome = RefOutcome::kRetained;
    ++stats.retained_entries;
  });

  space.publish_footprint(stats.retained_bytes);
  return stats;
}

/// Sizes every query in queue order with no bound.
inline Bytes query_closure(Heap& heap, QueryQueue& queue) {
  Bytes total = 0;
  queue.for_each([&](FutureId, GcSizeFuture& f) {
    f.abandoned = false;
    f.size = heap.alive(f.query) ? detail::mark_closure(heap, f.query, std::nullopt).bytes : 0;
    f.fresh = true;
    total += f.size;
  });
  return total;
}

/// Phases 5 and 6: clears references that were evicted or abandoned or whose
/// referent is unmarked, then clears every slot of a marked object that
/// points at an unmarked object.
inline void fixup_partial(Heap& heap, std::span<PrioSpace* const> spaces) {
  for (PrioSpace* space : spaces) {
    space->for_each_in_order([&](RefId, RefRecord& rec) {
      if (!rec.referent) return;
      const bool dropped =
          rec.outcome == RefOutcome::kEvicted || rec.outcome == RefOutcome::kAbandoned;
      if (dropped || heap.mark(*rec.referent) != Mark::kMarked) rec.referent.reset();
    });
  }
  for (ObjectId id : heap.alive_objects()) {
    if (heap.mark(id) != Mark::kMarked) continue;
    const auto slots = heap.object(id).slots.size();
    for (std::size_t i = 0; i < slots; ++i) {
      const ObjectRef target = heap.object(id).slots[i];
      if (target && heap.mark(*target) != Mark::kMarked) heap.clear_slot(id, i);
    }
  }
}

/// Phase 7: reclaims every unmarked object and clears all marks.
inline Bytes sweep(Heap& heap) {
  const Bytes freed =
      heap.reclaim_if([](const HeapObject& o) { return o.mark != Mark::kMarked; });
  for (ObjectId id : heap.alive_objects()) heap.set_mark(id, Mark::kNone);
  return freed;
}

namespace detail {

// Bytes of unmarked objects reachable from evicted entries, each object
// counted once across all spaces. Must run before fixup clears the edges.
inline Bytes evicted_footprint(const Heap& heap, const std::vector<ObjectId>& starts,
                               std::unordered_set<ObjectId>& counted) {
  Bytes total = 0;
  std::vector<ObjectId> stack;
  std::unordered_set<ObjectId> expanded;
  for (ObjectId s : starts) {
    if (expanded.insert(s).second) stack.push_back(s);
  }
  while (!stack.empty()) {
    const ObjectId o = stack.back();
    stack.pop_back();
    if (heap.mark(o) != Mark::kMarked && counted.insert(o).second) {
      total += heap.object(o).allocated;
    }
    for (const ObjectRef& child : heap.object(o).slots) {
      if (child && heap.mark(*child) != Mark::kMarked && expanded.insert(*child).second) {
        stack.push_back(*child);
      }
    }
  }
  return total;
}

}  // namespace detail

/// Runs one full prioritized collection over the heap. Spaces are processed
/// in the given order, then query queues.
inline CollectionStats collect(Heap& heap, std::span<PrioSpace* const> spaces,
                               std::span<QueryQueue* const> queues) {
  CollectionStats stats;
  stats.live_before = heap.live_bytes();

  std::vector<std::optional<Bytes>> bounds(spaces.size());
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    if (!bound_needs_live_size(spaces[i]->bound())) {
      bounds[i] = resolve_bound(spaces[i]->bound(), heap, 0);
    }
  }

  premark(heap, spaces, queues);
  stats.non_space_live_bytes = root_closure(heap);

  std::vector<std::vector<ObjectId>> evicted(spaces.size());
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    if (!bounds[i]) bounds[i] = resolve_bound(spaces[i]->bound(), heap, stats.non_space_live_bytes);
    SpaceStats s = prioritized_closure(heap, *spaces[i], *bounds[i], &evicted[i]);
    stats.space_marked_bytes += s.retained_bytes + s.carryover_bytes;
    stats.spaces.push_back(s);
  }
  for (QueryQueue* queue : queues) stats.query_marked_bytes += query_closure(heap, *queue);

  std::unordered_set<ObjectId> counted;
  for (std::size_t i = 0; i < spaces.size(); ++i) {
    stats.spaces[i].evicted_bytes = detail::evicted_footprint(heap, evicted[i], counted);
  }

  fixup_partial(heap, spaces);

  for (ObjectId id : heap.alive_objects()) {
    if (heap.mark(id) == Mark::kMarked) {
      ++stats.marked_objects;
      stats.marked_bytes += heap.object(id).allocated;
    }
  }
  stats.freed_bytes = sweep(heap);
  return stats;
}

/// Owns the priority spaces and query queues registered with a heap and
/// runs collections over them in registration order.
class Collector {
 public:
  PrioSpace& new_space(BoundSpec bound, EvictionMode mode = EvictionMode::kStrict) {
    spaces_.push_back(std::make_unique<PrioSpace>(bound, mode));
    space_ptrs_.push_back(spaces_.back().get());
    return *spaces_.back();
  }

  QueryQueue& new_queue() {
    queues_.push_back(std::make_unique<QueryQueue>());
    queue_ptrs_.push_back(queues_.back().get());
    return *queues_.back();
  }

  CollectionStats collect(Heap& heap) {
    CollectionStats stats = prioheap::collect(heap, space_ptrs_, queue_ptrs_);
    stats.gc_index = epoch_++;
    return stats;
  }

  // Number of completed collections.
  std::uint64_t epoch() const noexcept { return epoch_; }
  std::span<PrioSpace* const> spaces() const noexcept { return space_ptrs_; }
  std::span<QueryQueue* const> queues() const noexcept { return queue_ptrs_; }

 private:
  std::vector<std::unique_ptr<PrioSpace>> spaces_;
  std::vector<PrioSpace*> space_ptrs_;
  std::vector<std::unique_ptr<QueryQueue>> queues_;
  std::vector<QueryQueue*> queue_ptrs_;
  std::uint64_t epoch_ = 0;
};

/// One CSV row per collection. Per-space columns are joined with ';'.
inline void write_collection_csv_header(std::ostream& os) {
  os << "gc_index,marked_bytes,freed_bytes,L,space_retained_bytes,space_evicted_bytes,"
        "space_retained_entries,space_evicted_entries,abandoned\n";
}

inline void write_collection_csv_row(std::ostream& os, const CollectionStats& s) {
  auto join = [&](auto field) {
    std::string out;
    for (std::size_t i = 0; i < s.spaces.size(); ++i) {
      if (i) out += ';';
      out += std::to_string(field(s.spaces[i]));
    }
    return out;
  };
  os << s.gc_index << ',' << s.marked_bytes << ',' << s.freed_bytes << ','
     << s.non_space_live_bytes << ','
     << join([](const SpaceStats& x) { return x.retained_bytes; }) << ','
     << join([](const SpaceStats& x) { return x.evicted_bytes; }) << ','
     << join([](const SpaceStats& x) { return x.retained_entries; }) << ','
     << join([](const SpaceStats& x) { return x.evicted_entries; }) << ','
     << (s.abandoned() ? 1 : 0) << '\n';
}

}  // namespace prioheap
