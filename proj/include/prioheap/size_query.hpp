#pragma once

#include <cstdint>
#include <list>
#include <string>
#include <unordered_map>

#include "prioheap/errors.hpp"
#include "prioheap/heap.hpp"

namespace prioheap {

struct FutureId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(FutureId, FutureId) = default;
};

// Deferred result of a size query. Filled in by the collector.
struct GcSizeFuture {
  ObjectId query;
  Bytes size = 0;
  bool fresh = false;
  bool abandoned = false;
};

/// Ordered queue of size queries. The collector sizes them front to back, so
/// structure shared between queries is charged to the earliest one.
class QueryQueue {
 public:
  QueryQueue() = default;
  QueryQueue(const QueryQueue&) = delete;
  QueryQueue& operator=(const QueryQueue&) = delete;

  // Pushing a root that is already queued moves its existing future.
  FutureId push_back(const Heap& heap, ObjectId root) { return push(heap, root, false); }
  FutureId push_front(const Heap& heap, ObjectId root) { return push(heap, root, true); }

  void remove(FutureId id) {
    auto it = index_.find(id.value);
    if (it == index_.end()) {
      throw NotFound("size query " + std::to_string(id.value) + " is not in this queue");
    }
    by_root_.erase(it->second->second.query);
    entries_.erase(it->second);
    index_.erase(it);
  }

  bool contains(FutureId id) const { return index_.contains(id.value); }
  std::size_t size() const noexcept { return entries_.size(); }

  const GcSizeFuture& future(FutureId id) const { return checked(id)->second; }
  bool has_size(FutureId id) const { return checked(id)->second.fresh; }
  Bytes get_size(FutureId id) {
    GcSizeFuture& f = checked(id)->second;
    f.fresh = false;
    return f.size;
  }

  template <class F>
  void for_each(F&& f) {
    for (auto& [id, future] : entries_) f(id, future);
  }

 private:
  using Entries = std::list<std::pair<FutureId, GcSizeFuture>>;

  FutureId push(const Heap& heap, ObjectId root, bool front) {
    if (!heap.alive(root)) {
      throw DanglingReferent("query root " + std::to_string(root.value) + " is not alive");
    }
    if (auto existing = by_root_.find(root); existing != by_root_.end()) {
      auto it = index_.at(existing->second.value);
      entries_.splice(front ? entries_.begin() : entries_.end(), entries_, it);
      return existing->second;
    }
    const FutureId id{next_id_++};
    auto pos = entries_.insert(front ? entries_.begin() : entries_.end(),
                               {id, GcSizeFuture{root, 0, false, false}});
    index_.emplace(id.value, pos);
    by_root_.emplace(root, id);
    return id;
  }

  Entries::iterator checked(FutureId id) const {
    auto it = index_.find(id.value);
    if (it == index_.end()) {
      throw NotFound("size query " + std::to_string(id.value) + " is not in this queue");
    }
    return it->second;
  }

  Entries entries_;
  std::unordered_map<std::uint64_t, Entries::iterator> index_;
  std::unordered_map<ObjectId, FutureId> by_root_;
  std::uint64_t next_id_ = 0;
};

}  // namespace prioheap
