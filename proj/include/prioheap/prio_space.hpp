#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "prioheap/errors.hpp"
#include "prioheap/heap.hpp"

namespace prioheap {

struct FixedBound {
  Bytes bytes = 0;
};
// Fraction of total heap capacity.
struct HeapFraction {
  double fraction = 0.0;
};
// Fraction of the capacity not occupied by non-space live data.
struct FreeFraction {
  double fraction = 0.0;
};
// Bound chosen at each collection so that at least `reserve` bytes stay free.
struct AdaptiveReserve {
  Bytes reserve = 0;
};

using BoundSpec = std::variant<FixedBound, HeapFraction, FreeFraction, AdaptiveReserve>;

inline void validate_bound(const BoundSpec& spec) {
  auto check_fraction = [](double f) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw InvalidBound("bound fraction " + std::to_string(f) + " outside [0, 1]");
    }
  };
  if (const auto* h = std::get_if<HeapFraction>(&spec)) check_fraction(h->fraction);
  if (const auto* f = std::get_if<FreeFraction>(&spec)) check_fraction(f->fraction);
}

// True when the bound can only be resolved once the non-space live size is known.
inline bool bound_needs_live_size(const BoundSpec& spec) {
  return std::holds_alternative<FreeFraction>(spec) ||
         std::holds_alternative<AdaptiveReserve>(spec);
}

inline std::string describe_bound(const BoundSpec& spec) {
  struct {
    std::string operator()(const FixedBound& b) const {
      return "fixed_bytes=" + std::to_string(b.bytes);
    }
    std::string operator()(const HeapFraction& b) const {
      return "heap_fraction=" + trim(b.fraction);
    }
    std::string operator()(const FreeFraction& b) const {
      return "free_fraction=" + trim(b.fraction);
    }
    std::string operator()(const AdaptiveReserve& b) const {
      return "reserve_bytes=" + std::to_string(b.reserve);
    }
    static std::string trim(double v) {
      std::string s = std::to_string(v);
      while (s.size() > 1 && s.back() == '0') s.pop_back();
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s;
    }
  } visitor;
  return std::visit(visitor, spec);
}

enum class EvictionMode {
  kStrict,         // stop marking the instant the bound would be exceeded
  kEntryBoundary,  // finish the entry in progress, then stop
};

using Priority = std::int64_t;

struct RefId {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(RefId, RefId) = default;
};

// What the last collection did with a reference.
enum class RefOutcome : std::uint8_t { kNone, kRetained, kAbandoned, kEvicted };

struct RefRecord {
  ObjectRef referent;
  Priority priority = 0;
  std::uint64_t creation_seq = 0;
  Bytes gc_size = 0;
  bool fresh = false;
  RefOutcome outcome = RefOutcome::kNone;
};

class PrioSpace;

/// Handle to a priority reference owned by a PrioSpace.
class PrioReference {
 public:
  PrioReference() = default;
  PrioReference(PrioSpace* space, RefId id) : space_(space), id_(id) {}

  RefId id() const noexcept { return id_; }
  PrioSpace* space() const noexcept { return space_; }

  ObjectRef get() const;
  void set_priority(Priority p);
  Priority get_priority() const;
  bool has_gc_size() const;
  Bytes get_gc_size();

  friend bool operator==(const PrioReference&, const PrioReference&) = default;

 private:
  PrioSpace* space_ = nullptr;
  RefId id_;
};

/// A group of priority references governed by one byte bound.
///
/// References are kept ordered by descending priority, ties broken by
/// ascending creation sequence. Priority updates are O(log N).
class PrioSpace {
 public:
  explicit PrioSpace(BoundSpec bound, EvictionMode mode = EvictionMode::kStrict)
      : bound_(bound), mode_(mode) {
    validate_bound(bound_);
  }

  PrioSpace(const PrioSpace&) = delete;
  PrioSpace& operator=(const PrioSpace&) = delete;

  const BoundSpec& bound() const noexcept { return bound_; }
  EvictionMode eviction_mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  PrioReference new_ref(const Heap& heap, ObjectId obj, Priority priority) {
    if (!heap.alive(obj)) {
      throw DanglingReferent("referent " + std::to_string(obj.value) + " is not alive");
    }
    const RefId id{next_seq_++};
    records_.emplace(id.value, RefRecord{obj, priority, id.value, 0, false, RefOutcome::kNone});
    order_.insert(OrderKey{priority, id.value});
    return PrioReference(this, id);
  }

  void remove_ref(RefId id) {
    auto it = records_.find(id.value);
    if (it == records_.end()) {
      throw NotFound("reference " + std::to_string(id.value) + " is not in this space");
    }
    order_.erase(OrderKey{it->second.priority, id.value});
    records_.erase(it);
  }
  void remove_ref(const PrioReference& ref) { remove_ref(ref.id()); }

  bool contains(RefId id) const { return records_.contains(id.value); }

  void set_priority(RefId id, Priority p) {
    RefRecord& r = checked(id);
    if (r.priority == p) return;
    order_.erase(OrderKey{r.priority, id.value});
    r.priority = p;
    order_.insert(OrderKey{p, id.value});
  }
  Priority priority(RefId id) const { return checked(id).priority; }

  ObjectRef deref(RefId id) const {
    auto it = records_.find(id.value);
    return it == records_.end() ? std::nullopt : it->second.referent;
  }

  bool has_gc_size(RefId id) const { return checked(id).fresh; }
  Bytes get_gc_size(RefId id) {
    RefRecord& r = checked(id);
    r.fresh = false;
    return r.gc_size;
  }
  // Last computed size without touching the freshness flag.
  Bytes peek_gc_size(RefId id) const { return checked(id).gc_size; }

  bool has_gc_size() const noexcept { return fresh_; }
  Bytes get_gc_size() noexcept {
    fresh_ = false;
    return footprint_;
  }
  Bytes peek_gc_size() const noexcept { return footprint_; }

  /// Reference ids in collection order (priority desc, creation asc).
  std::vector<RefId> ordered_refs() const {
    std::vector<RefId> out;
    out.reserve(order_.size());
    for (const OrderKey& k : order_) out.push_back(RefId{k.seq});
    return out;
  }

  template <class F>
  void for_each_in_order(F&& f) {
    for (const OrderKey& k : order_) f(RefId{k.seq}, records_.at(k.seq));
  }

  // Collector interface.
  RefRecord& record(RefId id) { return checked(id); }
  const RefRecord& record(RefId id) const { return checked(id); }
  void publish_footprint(Bytes bytes) {
    footprint_ = bytes;
    fresh_ = true;
  }

 private:
  struct OrderKey {
    Priority priority;
    std::uint64_t seq;

    friend bool operator<(const OrderKey& a, const OrderKey& b) {
      if (a.priority != b.priority) return a.priority > b.priority;
      return a.seq < b.seq;
    }
  };

  RefRecord& checked(RefId id) {
    auto it = records_.find(id.value);
    if (it == records_.end()) {
      throw NotFound("reference " + std::to_string(id.value) + " is not in this space");
    }
    return it->second;
  }
  const RefRecord& checked(RefId id) const { return const_cast<PrioSpace*>(this)->checked(id); }

  BoundSpec bound_;
  EvictionMode mode_;
  std::unordered_map<std::uint64_t, RefRecord> records_;
  std::set<OrderKey> order_;
  std::uint64_t next_seq_ = 0;
  Bytes footprint_ = 0;
  bool fresh_ = false;
};

inline ObjectRef PrioReference::get() const {
  return space_ ? space_->deref(id_) : std::nullopt;
}
inline void PrioReference::set_priority(Priority p) { space_->set_priority(id_, p); }
inline Priority PrioReference::get_priority() const { return space_->priority(id_); }
inline bool PrioReference::has_gc_size() const { return space_->has_gc_size(id_); }
inline Bytes PrioReference::get_gc_size() { return space_->get_gc_size(id_); }

}  // namespace prioheap
