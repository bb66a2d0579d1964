#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <string>
#include <unordered_map>
#include <vector>

#include "prioheap/heap.hpp"

namespace prioheap {

// Number of objects reachable from a value root.
inline std::uint64_t count_nodes(const Heap& heap, ObjectId root) {
  std::uint64_t n = 0;
  std::vector<ObjectId> stack{root};
  std::unordered_set<ObjectId> seen{root};
  while (!stack.empty()) {
    const ObjectId o = stack.back();
    stack.pop_back();
    ++n;
    for (const ObjectRef& child : heap.object(o).slots) {
      if (child && seen.insert(*child).second) stack.push_back(*child);
    }
  }
  return n;
}

/// Conventional LRU cache with eager eviction on insert, bounded either by
/// entry count or by total weight. Values are kept alive as heap roots.
template <class Key, class Hash = std::hash<Key>>
class BaselineCache {
 public:
  using Weigher = std::function<std::uint64_t(const Heap&, ObjectId)>;

  static BaselineCache with_max_entries(Heap& heap, std::size_t max_entries) {
    return BaselineCache(heap, max_entries, [](const Heap&, ObjectId) { return 1; });
  }

  static BaselineCache with_max_weight(Heap& heap, std::uint64_t max_weight,
                                       Weigher weigher = count_nodes) {
    return BaselineCache(heap, max_weight, std::move(weigher));
  }

  ObjectRef get(const Key& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->value;
  }

  void put(const Key& key, ObjectId value, double /*miss_cost*/ = 0.0, Bytes /*size_hint*/ = 0) {
    if (auto it = map_.find(key); it != map_.end()) erase(it);
    const std::uint64_t w = weigher_(*heap_, value);
    retain(value);
    lru_.push_front(Node{key, value, w});
    map_.emplace(key, lru_.begin());
    weight_ += w;
    while (weight_ > capacity_ && !lru_.empty()) {
      evicted_.push_back(lru_.back().key);
      erase(map_.find(lru_.back().key));
    }
  }

  ObjectRef remove(const Key& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    const ObjectId value = it->second->value;
    erase(it);
    return value;
  }

  std::size_t size() const noexcept { return map_.size(); }
  std::uint64_t weight() const noexcept { return weight_; }
  std::uint64_t capacity() const noexcept { return capacity_; }

  // Most recently used first.
  std::vector<Key> keys_by_recency() const {
    std::vector<Key> out;
    for (const Node& n : lru_) out.push_back(n.key);
    return out;
  }

  // Every key evicted so far, in eviction order.
  const std::vector<Key>& evicted() const noexcept { return evicted_; }

 private:
  struct Node {
    Key key;
    ObjectId value;
    std::uint64_t weight;
  };
  using List = std::list<Node>;

  BaselineCache(Heap& heap, std::uint64_t capacity, Weigher weigher)
      : heap_(&heap), capacity_(capacity), weigher_(std::move(weigher)) {}

  void erase(typename std::unordered_map<Key, typename List::iterator, Hash>::iterator it) {
    weight_ -= it->second->weight;
    release(it->second->value);
    lru_.erase(it->second);
    map_.erase(it);
  }

  // Several keys may share one value; it stays a root while any holds it.
  void retain(ObjectId v) {
    if (holders_[v]++ == 0) heap_->add_root(v);
  }
  void release(ObjectId v) {
    auto it = holders_.find(v);
    if (--it->second == 0) {
      holders_.erase(it);
      heap_->remove_root(v);
    }
  }

  Heap* heap_;
  std::uint64_t capacity_;
  Weigher weigher_;
  List lru_;
  std::unordered_map<Key, typename List::iterator, Hash> map_;
  std::unordered_map<ObjectId, std::uint32_t> holders_;
  std::uint64_t weight_ = 0;
  std::vector<Key> evicted_;
};

}  // namespace prioheap
