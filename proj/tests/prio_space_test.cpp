#include <gtest/gtest.h>

#include <random>

#include "prioheap/collector.hpp"
#include "prioheap/prio_space.hpp"
#include "test_support.hpp"

namespace prioheap {
namespace {

TEST(BoundSpec, ValidatesFractions) {
  EXPECT_NO_THROW(PrioSpace(FixedBound{0}));
  EXPECT_NO_THROW(PrioSpace(HeapFraction{1.0}));
  EXPECT_THROW(PrioSpace(HeapFraction{1.5}), InvalidBound);
  EXPECT_THROW(PrioSpace(FreeFraction{-0.1}), InvalidBound);
}

TEST(BoundSpec, Describe) {
  EXPECT_EQ(describe_bound(HeapFraction{0.4}), "heap_fraction=0.4");
  EXPECT_EQ(describe_bound(FixedBound{512}), "fixed_bytes=512");
}

TEST(PrioSpace, EqualPrioritiesOrderedByCreation) {
  Heap heap(1000);
  PrioSpace space(FixedBound{1000});
  const auto a = space.new_ref(heap, heap.alloc(8, 0), 1);
  const auto b = space.new_ref(heap, heap.alloc(8, 0), 1);
  const auto c = space.new_ref(heap, heap.alloc(8, 0), 2);
  EXPECT_EQ(space.ordered_refs(), (std::vector<RefId>{c.id(), a.id(), b.id()}));
}

TEST(PrioSpace, RootReachableReferentSizesToZero) {
  Heap heap(1000);
  PrioSpace space(FixedBound{1000});
  const ObjectId o = heap.alloc(8, 0);
  heap.add_root(o);
  auto ref = space.new_ref(heap, o, 0);
  std::vector<PrioSpace*> spaces{&space};
  collect(heap, spaces, {});
  EXPECT_EQ(ref.get(), ObjectRef(o));
  EXPECT_EQ(ref.get_gc_size(), 0u);
}

TEST(PrioSpace, SweptReferentIsRejected) {
  Heap heap(1000);
  PrioSpace space(FixedBound{1000});
  const ObjectId o = heap.alloc(8, 0);
  collect(heap, {}, {});
  EXPECT_THROW(space.new_ref(heap, o, 0), DanglingReferent);
}

TEST(PrioSpace, SetPriorityReadsBackAndSameValueIsStable) {
  Heap heap(1000);
  PrioSpace space(FixedBound{1000});
  auto a = space.new_ref(heap, heap.alloc(8, 0), 1);
  auto b = space.new_ref(heap, heap.alloc(8, 0), 1);
  a.set_priority(7);
  EXPECT_EQ(a.get_priority(), 7);
  const auto before = space.ordered_refs();
  a.set_priority(7);
  EXPECT_EQ(space.ordered_refs(), before);
  b.set_priority(7);
  EXPECT_EQ(space.ordered_refs(), (std::vector<RefId>{a.id(), b.id()}));
}

TEST(PrioSpace, DerefBeforeAndAfterEviction) {
  Heap heap(1000);
  PrioSpace space(FixedBound{0});
  const ObjectId o = heap.alloc(8, 0);
  auto ref = space.new_ref(heap, o, 0);
  EXPECT_EQ(ref.get(), ObjectRef(o));
  std::vector<PrioSpace*> spaces{&space};
  collect(heap, spaces, {});
  EXPECT_EQ(ref.get(), std::nullopt);
}

TEST(PrioSpace, RemoveRef) {
  Heap heap(1000);
  PrioSpace space(FixedBound{1000});
  auto ref = space.new_ref(heap, heap.alloc(8, 0), 0);
  space.remove_ref(ref);
  EXPECT_TRUE(space.empty());
  EXPECT_THROW(space.remove_ref(ref), NotFound);
  EXPECT_EQ(ref.get(), std::nullopt);
}

TEST(PrioSpace, RemovedRefIsNotSized) {
  Heap heap(1000);
  PrioSpace space(FixedBound{1000});
  const ObjectId kept = heap.alloc(8, 0), dropped = heap.alloc(16, 0);
  space.new_ref(heap, kept, 0);
  auto r = space.new_ref(heap, dropped, 1);
  space.remove_ref(r);
  std::vector<PrioSpace*> spaces{&space};
  const auto stats = collect(heap, spaces, {});
  EXPECT_EQ(stats.spaces[0].retained_entries, 1u);
  EXPECT_EQ(stats.spaces[0].retained_bytes, 8u);
  EXPECT_FALSE(heap.alive(dropped));
}

TEST(PrioSpaceProperty, OrderMatchesSortedSnapshot) {
  std::mt19937_64 rng(17);
  Heap heap(1 << 20);
  PrioSpace space(FixedBound{1000});
  std::vector<PrioReference> refs;
  for (int i = 0; i < 100; ++i) refs.push_back(space.new_ref(heap, heap.alloc(8, 0), 0));
  std::uniform_int_distribution<std::size_t> pick(0, refs.size() - 1);
  std::uniform_int_distribution<Priority> prio(-20, 20);
  for (int step = 0; step < 1000; ++step) {
    refs[pick(rng)].set_priority(prio(rng));
    ASSERT_EQ(space.ordered_refs(), testing::sorted_refs(space)) << step;
  }
}

// Adding a constant to every priority leaves every eviction decision alone.
TEST(PrioSpaceProperty, ShiftingAllPrioritiesChangesNothing) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = rng();
    std::vector<RefOutcome> outcomes[2];
    for (int shift = 0; shift < 2; ++shift) {
      std::mt19937_64 g(seed);
      Heap heap(1 << 24);
      const auto ids = testing::random_graph(heap, g, {.objects = 100});
      PrioSpace space(FixedBound{3000});
      std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
      std::uniform_int_distribution<Priority> prio(-10, 10);
      std::vector<RefId> created;
      for (int i = 0; i < 15; ++i) {
        created.push_back(space.new_ref(heap, ids[pick(g)], prio(g) + (shift ? 1'000'000 : 0)).id());
      }
      std::vector<PrioSpace*> spaces{&space};
      collect(heap, spaces, {});
      for (RefId id : created) outcomes[shift].push_back(space.record(id).outcome);
    }
    ASSERT_EQ(outcomes[0], outcomes[1]) << trial;
  }
}

// A space's outcome depends on earlier spaces' markings, never on a later
// space's priorities.
TEST(PrioSpaceProperty, LaterSpacePrioritiesDoNotAffectEarlierSpace) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = rng();
    std::vector<RefOutcome> outcomes[2];
    for (int variant = 0; variant < 2; ++variant) {
      std::mt19937_64 g(seed);
      Heap heap(1 << 24);
      const auto ids = testing::random_graph(heap, g, {.objects = 100});
      PrioSpace a(FixedBound{2000}), b(FixedBound{2000});
      std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
      std::uniform_int_distribution<Priority> prio(-10, 10);
      std::vector<RefId> in_a;
      for (int i = 0; i < 10; ++i) in_a.push_back(a.new_ref(heap, ids[pick(g)], prio(g)).id());
      std::vector<PrioReference> in_b;
      for (int i = 0; i < 10; ++i) in_b.push_back(b.new_ref(heap, ids[pick(g)], prio(g)));
      if (variant) {
        for (auto& r : in_b) r.set_priority(-r.get_priority());
      }
      std::vector<PrioSpace*> spaces{&a, &b};
      collect(heap, spaces, {});
      for (RefId id : in_a) outcomes[variant].push_back(a.record(id).outcome);
    }
    ASSERT_EQ(outcomes[0], outcomes[1]) << trial;
  }
}

TEST(PrioSpaceProperty, SpaceFootprintEqualsSumOfReferences) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Heap heap(1 << 24);
    const auto ids = testing::random_graph(heap, rng, {.objects = 100});
    PrioSpace space(FixedBound{2500}, trial % 2 ? EvictionMode::kStrict : EvictionMode::kEntryBoundary);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    std::vector<PrioReference> refs;
    for (int i = 0; i < 12; ++i) refs.push_back(space.new_ref(heap, ids[pick(rng)], i % 4));
    std::vector<PrioSpace*> spaces{&space};
    collect(heap, spaces, {});
    Bytes sum = 0;
    for (auto& r : refs) sum += r.get_gc_size();
    ASSERT_EQ(space.get_gc_size(), sum) << trial;
  }
}

// Retained references form a prefix of the collection order.
TEST(PrioSpaceProperty, StrictModeKeepsPrefix) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    Heap heap(1 << 24);
    const auto ids = testing::random_graph(heap, rng, {.objects = 120});
    PrioSpace space(FixedBound{std::uniform_int_distribution<Bytes>(0, 5000)(rng)});
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    std::uniform_int_distribution<Priority> prio(0, 6);
    for (int i = 0; i < 15; ++i) space.new_ref(heap, ids[pick(rng)], prio(rng));
    std::vector<PrioSpace*> spaces{&space};
    const auto order = space.ordered_refs();
    const auto stats = collect(heap, spaces, {});
    ASSERT_LE(stats.spaces[0].retained_bytes, stats.spaces[0].bound);
    bool dropped = false;
    for (RefId id : order) {
      const bool kept = space.record(id).outcome == RefOutcome::kRetained;
      ASSERT_FALSE(kept && dropped) << trial;
      if (!kept) dropped = true;
    }
  }
}

}  // namespace
}  // namespace prioheap
