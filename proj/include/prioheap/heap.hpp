#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "prioheap/errors.hpp"

namespace prioheap {

using Bytes = std::uint64_t;

struct ObjectId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(ObjectId, ObjectId) = default;
};

// A slot or referent: either an object or null.
using ObjectRef = std::optional<ObjectId>;

}  // namespace prioheap

template <>
struct std::hash<prioheap::ObjectId> {
  std::size_t operator()(prioheap::ObjectId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};

namespace prioheap {

using ObjectSet = std::unordered_set<ObjectId>;

/// Allocation-size denominations of a segregated free-list allocator.
///
/// Requests up to the large-object threshold are rounded up to the smallest
/// class that fits; larger requests are allocated exactly. Requests between
/// the last class and the threshold (when the two differ) are also exact.
class SizeClassTable {
 public:
  SizeClassTable(std::vector<Bytes> classes, Bytes large_object_threshold)
      : classes_(std::move(classes)), threshold_(large_object_threshold) {
    if (classes_.empty()) {
      throw ConfigError("size class table is empty");
    }
    if (classes_.front() == 0) {
      throw ConfigError("size classes must be positive");
    }
    if (std::adjacent_find(classes_.begin(), classes_.end(), std::greater_equal<>()) !=
        classes_.end()) {
      throw ConfigError("size classes must be strictly ascending");
    }
    if (threshold_ < classes_.back()) {
      throw ConfigError("large object threshold is below the largest size class");
    }
  }

  /// 51 classes: 8-byte steps from 8 to 256, then geometric growth
  /// (ratio 32^(1/19), about 1.2) up to 8192, rounded to 8 bytes.
  static SizeClassTable standard() {
    std::vector<Bytes> classes;
    for (Bytes c = 8; c <= 256; c += 8) {
      classes.push_back(c);
    }
    constexpr int kGeometricSteps = 19;
    const double ratio = std::pow(8192.0 / 256.0, 1.0 / kGeometricSteps);
    for (int i = 1; i <= kGeometricSteps; ++i) {
      const double raw = 256.0 * std::pow(ratio, i);
      auto rounded = static_cast<Bytes>(std::llround(raw / 8.0)) * 8;
      if (i == kGeometricSteps) rounded = 8192;
      classes.push_back(rounded);
    }
    return SizeClassTable(std::move(classes), 8192);
  }

  Bytes allocated_size(Bytes requested) const {
    if (requested > threshold_) return requested;
    auto it = std::lower_bound(classes_.begin(), classes_.end(), requested);
    return it == classes_.end() ? requested : *it;
  }

  const std::vector<Bytes>& classes() const noexcept { return classes_; }
  Bytes large_object_threshold() const noexcept { return threshold_; }

 private:
  std::vector<Bytes> classes_;
  Bytes threshold_;
};

// Mark state during a collection. Premarked objects are barriers for the
// root closure; everything else is either unmarked or fully marked.
enum class Mark : std::uint8_t { kNone, kPremarked, kMarked };

struct HeapObject {
  ObjectId id;
  Bytes requested = 0;
  Bytes allocated = 0;
  std::vector<ObjectRef> slots;
  Mark mark = Mark::kNone;
  bool alive = true;
};

/// The simulated heap: an object graph with byte accounting and a root set.
///
/// Object ids are dense and never reused. Swept objects stay behind as
/// tombstones (alive == false, no slots) so stale ids are detectable.
class Heap {
 public:
  explicit Heap(Bytes capacity, SizeClassTable classes = SizeClassTable::standard())
      : capacity_(capacity), classes_(std::move(classes)) {}

  Bytes capacity() const noexcept { return capacity_; }
  Bytes live_bytes() const noexcept { return live_bytes_; }
  Bytes free_bytes() const noexcept { return capacity_ - live_bytes_; }
  const SizeClassTable& size_classes() const noexcept { return classes_; }

  // Cumulative allocation since construction.
  Bytes total_allocated() const noexcept { return total_allocated_; }
  std::uint64_t alloc_count() const noexcept { return objects_.size(); }

  bool can_alloc(Bytes requested) const {
    return requested > 0 && classes_.allocated_size(requested) <= free_bytes();
  }

  ObjectId alloc(Bytes requested, std::size_t slot_count) {
    if (requested == 0) {
      throw std::invalid_argument("allocation request of zero bytes");
    }
    const Bytes allocated = classes_.allocated_size(requested);
    if (allocated > free_bytes()) {
      throw OutOfMemory("cannot allocate " + std::to_string(allocated) + " bytes with " +
                        std::to_string(free_bytes()) + " free");
    }
    const ObjectId id{objects_.size()};
    objects_.push_back(HeapObject{id, requested, allocated,
                                  std::vector<ObjectRef>(slot_count), Mark::kNone, true});
    alive_ids_.push_back(id);
    live_bytes_ += allocated;
    total_allocated_ += allocated;
    return id;
  }

  bool contains(ObjectId id) const noexcept { return id.value < objects_.size(); }
  bool alive(ObjectId id) const noexcept { return contains(id) && objects_[id.value].alive; }

  const HeapObject& object(ObjectId id) const { return objects_.at(id.value); }

  ObjectRef slot(ObjectId obj, std::size_t index) const {
    const HeapObject& o = live_object(obj);
    check_index(o, index);
    return o.slots[index];
  }

  std::span<const ObjectRef> slots(ObjectId obj) const { return live_object(obj).slots; }

  void set_slot(ObjectId obj, std::size_t index, ObjectRef target) {
    HeapObject& o = live_object(obj);
    check_index(o, index);
    if (target && !alive(*target)) {
      throw DanglingWrite("slot write targets swept object " + std::to_string(target->value));
    }
    o.slots[index] = target;
  }

  void add_root(ObjectId obj) {
    live_object(obj);
    roots_.insert(obj);
  }

  void remove_root(ObjectId obj) {
    if (roots_.erase(obj) == 0) {
      throw NotFound("object " + std::to_string(obj.value) + " is not a root");
    }
  }

  bool is_root(ObjectId obj) const { return roots_.contains(obj); }
  const std::set<ObjectId>& roots() const noexcept { return roots_; }

  // Alive objects in allocation order.
  std::span<const ObjectId> alive_objects() const noexcept { return alive_ids_; }

  /// Recomputes the live byte total from scratch.
  Bytes audit_live_bytes() const {
    Bytes total = 0;
    for (ObjectId id : alive_ids_) total += objects_[id.value].allocated;
    return total;
  }

  // Collector interface. Marks and slot clearing bypass the mutator checks.

  Mark mark(ObjectId id) const { return objects_[id.value].mark; }
  void set_mark(ObjectId id, Mark m) { objects_[id.value].mark = m; }
  void clear_slot(ObjectId id, std::size_t index) { objects_[id.value].slots[index].reset(); }

  /// Reclaims every alive object the predicate selects. Returns freed bytes.
  template <class Pred>
  Bytes reclaim_if(Pred&& pred) {
    Bytes freed = 0;
    auto keep = alive_ids_.begin();
    for (ObjectId id : alive_ids_) {
      HeapObject& o = objects_[id.value];
      if (pred(static_cast<const HeapObject&>(o))) {
        o.alive = false;
        o.mark = Mark::kNone;
        std::vector<ObjectRef>().swap(o.slots);
        freed += o.allocated;
      } else {
        *keep++ = id;
      }
    }
    alive_ids_.erase(keep, alive_ids_.end());
    live_bytes_ -= freed;
    return freed;
  }

 private:
  HeapObject& live_object(ObjectId id) {
    if (!alive(id)) {
      throw std::invalid_argument("object " + std::to_string(id.value) + " is not alive");
    }
    return objects_[id.value];
  }
  const HeapObject& live_object(ObjectId id) const {
    return const_cast<Heap*>(this)->live_object(id);
  }
  static void check_index(const HeapObject& o, std::size_t index) {
    if (index >= o.slots.size()) {
      throw std::out_of_range("slot " + std::to_string(index) + " out of range for object " +
                              std::to_string(o.id.value));
    }
  }

  Bytes capacity_;
  SizeClassTable classes_;
  std::vector<HeapObject> objects_;
  std::vector<ObjectId> alive_ids_;
  std::set<ObjectId> roots_;
  Bytes live_bytes_ = 0;
  Bytes total_allocated_ = 0;
};

/// Objects reachable from `starts` by following slots. Traversal does not
/// continue through a barrier object unless that object is itself a start;
/// barrier objects that are reached are still part of the result.
inline ObjectSet reachable_from(const Heap& heap, const ObjectSet& starts,
                                const ObjectSet& barriers) {
  ObjectSet seen;
  std::vector<ObjectId> stack;
  for (ObjectId s : starts) {
    if (seen.insert(s).second) stack.push_back(s);
  }
  while (!stack.empty()) {
    const ObjectId o = stack.back();
    stack.pop_back();
    if (barriers.contains(o) && !starts.contains(o)) continue;
    for (const ObjectRef& child : heap.object(o).slots) {
      if (child && seen.insert(*child).second) stack.push_back(*child);
    }
  }
  return seen;
}

inline Bytes allocated_bytes(const Heap& heap, const ObjectSet& objects) {
  Bytes total = 0;
  for (ObjectId id : objects) total += heap.object(id).allocated;
  return total;
}

}  // namespace prioheap
