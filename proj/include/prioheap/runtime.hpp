#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prioheap/collector.hpp"
#include "prioheap/errors.hpp"
#include "prioheap/heap.hpp"

namespace prioheap {

// Simulated-time coefficients, in seconds.
struct CostModel {
  double bandwidth_bytes_per_sec = 10e6;  // miss service over a 10 MB/s link
  double hit_cost_per_node = 10e-9;
  double gc_cost_per_marked_byte = 5e-9;
  double gc_fixed_cost = 1e-3;
  // Collect after this many bytes of allocation; 0 collects only on failure.
  Bytes gc_interval_bytes = 0;
};

// Allocation failed even after a full collection.
class SimulatedCrash : public OutOfMemory {
 public:
  using OutOfMemory::OutOfMemory;
};

struct GcRecord {
  CollectionStats stats;
  double time = 0.0;     // simulated clock when the collection started
  double gc_time = 0.0;  // simulated cost of this collection
  Bytes live_after = 0;
  Bytes free_after = 0;
  std::size_t event_index = 0;
};

/// A heap, its collector, and a simulated clock split into mutator and GC
/// time. Allocation collects on failure and crashes if that frees too little.
class Runtime {
 public:
  explicit Runtime(Bytes capacity, SizeClassTable classes = SizeClassTable::standard(),
                   CostModel costs = {})
      : heap_(capacity, std::move(classes)), costs_(costs) {}

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  Heap& heap() noexcept { return heap_; }
  const Heap& heap() const noexcept { return heap_; }
  Collector& collector() noexcept { return collector_; }
  const CostModel& costs() const noexcept { return costs_; }

  ObjectId allocate(Bytes requested, std::size_t slots) {
    if (costs_.gc_interval_bytes > 0 &&
        heap_.total_allocated() - allocated_at_last_gc_ >= costs_.gc_interval_bytes) {
      collect();
    }
    if (!heap_.can_alloc(requested)) {
      collect();
      if (!heap_.can_alloc(requested)) {
        throw SimulatedCrash("out of memory: " + std::to_string(requested) +
                             " bytes requested, " + std::to_string(heap_.free_bytes()) +
                             " free after collection");
      }
    }
    return heap_.alloc(requested, slots);
  }

  const GcRecord& collect() {
    GcRecord rec;
    rec.time = now();
    rec.event_index = event_index_;
    rec.stats = collector_.collect(heap_);
    rec.gc_time = costs_.gc_cost_per_marked_byte * static_cast<double>(rec.stats.marked_bytes) +
                  costs_.gc_fixed_cost;
    rec.live_after = heap_.live_bytes();
    rec.free_after = heap_.free_bytes();
    gc_time_ += rec.gc_time;
    gc_marked_bytes_ += rec.stats.marked_bytes;
    allocated_at_last_gc_ = heap_.total_allocated();
    gc_log_.push_back(rec);
    for (auto& listener : listeners_) listener(gc_log_.back());
    return gc_log_.back();
  }

  void charge_mutator(double seconds) { mutator_time_ += seconds; }

  double now() const noexcept { return mutator_time_ + gc_time_; }
  double mutator_time() const noexcept { return mutator_time_; }
  double gc_time() const noexcept { return gc_time_; }
  std::uint64_t gc_count() const noexcept { return gc_log_.size(); }
  Bytes gc_marked_bytes() const noexcept { return gc_marked_bytes_; }
  const std::vector<GcRecord>& gc_log() const noexcept { return gc_log_; }

  // Called after every collection, in registration order.
  void on_collect(std::function<void(const GcRecord&)> listener) {
    listeners_.push_back(std::move(listener));
  }

  void set_event_index(std::size_t i) noexcept { event_index_ = i; }

 private:
  Heap heap_;
  Collector collector_;
  CostModel costs_;
  double mutator_time_ = 0.0;
  double gc_time_ = 0.0;
  Bytes gc_marked_bytes_ = 0;
  Bytes allocated_at_last_gc_ = 0;
  std::size_t event_index_ = 0;
  std::vector<GcRecord> gc_log_;
  std::vector<std::function<void(const GcRecord&)>> listeners_;
};

// Nodes needed for a value tree whose allocated total is within half a node
// of the target.
inline std::size_t value_node_count(Bytes target, Bytes node_allocated) {
  const auto n = std::llround(static_cast<double>(target) / static_cast<double>(node_allocated));
  return static_cast<std::size_t>(std::max<long long>(n, 1));
}

/// Builds a complete binary tree (two slots per node, heap order) through
/// `alloc`. The root stays a heap root while building so a collection
/// triggered mid-build keeps the partial tree; it is unrooted on return.
template <class Alloc>
ObjectId build_tree(Heap& heap, std::size_t nodes, Bytes node_request, Alloc&& alloc) {
  const ObjectId root = alloc(node_request, 2);
  heap.add_root(root);
  std::vector<ObjectId> ids;
  ids.reserve(nodes);
  ids.push_back(root);
  try {
    for (std::size_t i = 1; i < nodes; ++i) {
      const ObjectId id = alloc(node_request, 2);
      heap.set_slot(ids[(i - 1) / 2], (i - 1) % 2, id);
      ids.push_back(id);
    }
  } catch (...) {
    heap.remove_root(root);
    throw;
  }
  heap.remove_root(root);
  return root;
}

/// Value tree of roughly `target` allocated bytes, allocated directly.
inline ObjectId build_value(Heap& heap, Bytes target, Bytes node_request) {
  const Bytes node = heap.size_classes().allocated_size(node_request);
  return build_tree(heap, value_node_count(target, node), node_request,
                    [&heap](Bytes req, std::size_t slots) { return heap.alloc(req, slots); });
}

/// Value tree of roughly `target` allocated bytes, collecting as needed.
inline ObjectId build_value(Runtime& rt, Bytes target, Bytes node_request) {
  const Bytes node = rt.heap().size_classes().allocated_size(node_request);
  return build_tree(rt.heap(), value_node_count(target, node), node_request,
                    [&rt](Bytes req, std::size_t slots) { return rt.allocate(req, slots); });
}

}  // namespace prioheap
