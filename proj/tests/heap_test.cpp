#include <gtest/gtest.h>

#include <random>
#include <unordered_map>

#include "prioheap/heap.hpp"
#include "test_support.hpp"

namespace prioheap {
namespace {

SizeClassTable small_table() { return SizeClassTable({32, 48, 64}, 8192); }

TEST(SizeClassTable, RoundsUpToNextClass) {
  const auto t = small_table();
  EXPECT_EQ(t.allocated_size(40), 48u);
  EXPECT_EQ(t.allocated_size(32), 32u);
  EXPECT_EQ(t.allocated_size(1), 32u);
  EXPECT_EQ(t.allocated_size(100000), 100000u);
  // Between the last class and the threshold there is no class to round to.
  EXPECT_EQ(t.allocated_size(65), 65u);
}

TEST(SizeClassTable, StandardTableHas51AscendingClasses) {
  const auto t = SizeClassTable::standard();
  ASSERT_EQ(t.classes().size(), 51u);
  EXPECT_EQ(t.classes().front(), 8u);
  EXPECT_EQ(t.classes()[31], 256u);
  EXPECT_EQ(t.classes().back(), 8192u);
  EXPECT_EQ(t.large_object_threshold(), 8192u);
  for (std::size_t i = 1; i < t.classes().size(); ++i) {
    EXPECT_LT(t.classes()[i - 1], t.classes()[i]);
    EXPECT_EQ(t.classes()[i] % 8, 0u);
  }
}

TEST(SizeClassTable, RejectsMalformedTables) {
  EXPECT_THROW(SizeClassTable({}, 10), ConfigError);
  EXPECT_THROW(SizeClassTable({0, 8}, 10), ConfigError);
  EXPECT_THROW(SizeClassTable({16, 8}, 32), ConfigError);
  EXPECT_THROW(SizeClassTable({8, 8}, 32), ConfigError);
  EXPECT_THROW(SizeClassTable({8, 16}, 8), ConfigError);
}

TEST(Heap, AllocAccountsAllocatedSize) {
  Heap heap(1000, small_table());
  const ObjectId a = heap.alloc(40, 2);
  EXPECT_EQ(heap.object(a).requested, 40u);
  EXPECT_EQ(heap.object(a).allocated, 48u);
  EXPECT_EQ(heap.live_bytes(), 48u);
  EXPECT_EQ(heap.total_allocated(), 48u);
  EXPECT_EQ(heap.free_bytes(), 952u);
}

TEST(Heap, AllocBeyondCapacityThrows) {
  Heap heap(100, small_table());
  heap.alloc(64, 0);
  EXPECT_FALSE(heap.can_alloc(40));
  EXPECT_THROW(heap.alloc(40, 0), OutOfMemory);
  EXPECT_EQ(heap.live_bytes(), 64u);
  EXPECT_TRUE(heap.can_alloc(32));
}

TEST(Heap, ZeroByteAllocIsRejected) {
  Heap heap(100, small_table());
  EXPECT_THROW(heap.alloc(0, 1), std::invalid_argument);
}

TEST(Heap, SetSlotReadsBack) {
  Heap heap(1000, small_table());
  const ObjectId a = heap.alloc(32, 2);
  const ObjectId b = heap.alloc(32, 0);
  heap.set_slot(a, 0, b);
  EXPECT_EQ(heap.slot(a, 0), ObjectRef(b));
  heap.set_slot(a, 0, std::nullopt);
  EXPECT_EQ(heap.slot(a, 0), std::nullopt);
  EXPECT_THROW(heap.set_slot(a, 5, b), std::out_of_range);
}

TEST(Heap, WriteOfSweptTargetIsDangling) {
  Heap heap(1000, small_table());
  const ObjectId a = heap.alloc(32, 1);
  const ObjectId b = heap.alloc(32, 0);
  heap.add_root(a);
  heap.reclaim_if([&](const HeapObject& o) { return o.id == b; });
  EXPECT_FALSE(heap.alive(b));
  EXPECT_THROW(heap.set_slot(a, 0, b), DanglingWrite);
  // Ids are not reused.
  EXPECT_NE(heap.alloc(32, 0), b);
}

TEST(Heap, RootsHaveSetSemantics) {
  Heap heap(1000, small_table());
  const ObjectId a = heap.alloc(32, 0);
  heap.add_root(a);
  heap.add_root(a);
  EXPECT_EQ(heap.roots().size(), 1u);
  heap.remove_root(a);
  EXPECT_TRUE(heap.roots().empty());
  EXPECT_THROW(heap.remove_root(a), NotFound);
}

TEST(ReachableFrom, SingleStartWithoutEdges) {
  Heap heap(1000, small_table());
  const ObjectId root = heap.alloc(32, 2);
  EXPECT_EQ(reachable_from(heap, {root}, {}), ObjectSet{root});
}

TEST(ReachableFrom, BarrierStopsTraversal) {
  Heap heap(1000, small_table());
  const ObjectId a = heap.alloc(32, 1);
  const ObjectId b = heap.alloc(32, 1);
  const ObjectId c = heap.alloc(32, 1);
  heap.set_slot(a, 0, b);
  heap.set_slot(b, 0, c);
  EXPECT_EQ(reachable_from(heap, {a}, {b}), (ObjectSet{a, b}));
  // A start is traversed even when it is also a barrier.
  EXPECT_EQ(reachable_from(heap, {a, b}, {b}), (ObjectSet{a, b, c}));
}

// Recursive traversal over an adjacency list copied out of the heap.
void recursive_visit(const std::unordered_map<std::uint64_t, std::vector<std::uint64_t>>& adj,
                     std::uint64_t node, std::set<std::uint64_t>& seen,
                     const std::set<std::uint64_t>& barriers,
                     const std::set<std::uint64_t>& starts) {
  if (!seen.insert(node).second) return;
  if (barriers.contains(node) && !starts.contains(node)) return;
  for (std::uint64_t next : adj.at(node)) recursive_visit(adj, next, seen, barriers, starts);
}

TEST(ReachableFrom, MatchesIndependentTraversalOnRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Heap heap(1 << 20);
    const auto ids = testing::random_graph(heap, rng, {.objects = 50, .max_slots = 3});
    std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> adj;
    for (ObjectId id : ids) {
      auto& out = adj[id.value];
      for (const ObjectRef& s : heap.object(id).slots) {
        if (s) out.push_back(s->value);
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    ObjectSet starts, barriers;
    std::set<std::uint64_t> s_starts, s_barriers;
    for (int k = 0; k < 3; ++k) {
      const ObjectId s = ids[pick(rng)];
      starts.insert(s);
      s_starts.insert(s.value);
      const ObjectId b = ids[pick(rng)];
      barriers.insert(b);
      s_barriers.insert(b.value);
    }
    std::set<std::uint64_t> expected;
    for (std::uint64_t s : s_starts) recursive_visit(adj, s, expected, s_barriers, s_starts);

    const ObjectSet got = reachable_from(heap, starts, barriers);
    std::set<std::uint64_t> got_sorted;
    for (ObjectId id : got) got_sorted.insert(id.value);
    ASSERT_EQ(got_sorted, expected) << "trial " << trial;
  }
}

TEST(ReachableFrom, MonotoneAndIdempotent) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Heap heap(1 << 20);
    const auto ids = testing::random_graph(heap, rng, {.objects = 60});
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    const ObjectSet small{ids[pick(rng)]};
    ObjectSet large = small;
    large.insert(ids[pick(rng)]);
    const ObjectSet r_small = reachable_from(heap, small, {});
    const ObjectSet r_large = reachable_from(heap, large, {});
    for (ObjectId x : r_small) ASSERT_TRUE(r_large.contains(x));
    ASSERT_EQ(reachable_from(heap, r_small, {}), r_small);
  }
}

TEST(Heap, AuditAndRoundingHoldUnderRandomOperations) {
  std::mt19937_64 rng(3);
  const auto table = SizeClassTable::standard();
  Heap heap(1 << 22, table);
  std::vector<ObjectId> live;
  std::uniform_int_distribution<Bytes> size(1, 20000);
  std::uniform_int_distribution<int> op(0, 9);
  for (int step = 0; step < 5000; ++step) {
    const int o = op(rng);
    if (o < 6 || live.empty()) {
      const Bytes req = size(rng);
      if (!heap.can_alloc(req)) continue;
      live.push_back(heap.alloc(req, 1));
    } else if (o < 8) {
      std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
      const std::size_t i = pick(rng), j = pick(rng);
      heap.set_slot(live[i], 0, live[j]);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
      const ObjectId victim = live[pick(rng)];
      // Clear incoming edges first so no survivor points at the victim.
      for (ObjectId id : live) {
        if (heap.slot(id, 0) == ObjectRef(victim)) heap.set_slot(id, 0, std::nullopt);
      }
      heap.reclaim_if([&](const HeapObject& h) { return h.id == victim; });
      std::erase(live, victim);
    }
    ASSERT_EQ(heap.audit_live_bytes(), heap.live_bytes());
  }
  for (ObjectId id : heap.alive_objects()) {
    const HeapObject& o = heap.object(id);
    const auto& classes = table.classes();
    Bytes expected = o.requested;
    if (o.requested <= table.large_object_threshold()) {
      expected = *std::find_if(classes.begin(), classes.end(),
                               [&](Bytes c) { return c >= o.requested; });
    }
    ASSERT_EQ(o.allocated, expected);
    ASSERT_GE(o.allocated, o.requested);
  }
}

}  // namespace
}  // namespace prioheap
