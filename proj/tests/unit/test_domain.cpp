#include <doctest.h>

#include <algorithm>
#include <random>

#include "unifi/domain.hpp"
#include "unifi/error.hpp"

using namespace unifi;

TEST_CASE("event names and indices round-trip") {
  for (RealEvent e : kAllRealEvents) {
    CHECK(real_event_from_string(to_string(e)) == e);
    CHECK(real_event_from_index(index_of(e)) == e);
  }
  for (int i = 0; i < static_cast<int>(kNumSimEvents); ++i) {
    const SimEvent s = sim_event_from_index(i);
    CHECK(sim_event_from_string(to_string(s)) == s);
  }
  CHECK(index_of(RealEvent::Absence) == 0);
  CHECK(index_of(RealEvent::Walking) == 3);
  CHECK_THROWS_AS(real_event_from_string("running"), ConfigError);
  CHECK_THROWS_AS(real_event_from_index(4), DataError);
  CHECK_THROWS_AS(sim_event_from_index(-1), DataError);
}

TEST_CASE("canonical features are the five table columns") {
  const auto& f = canonical_features();
  CHECK(f[0] == FeatureKind{Descriptor::SubcarrierCorr, 0.5});
  CHECK(f[1] == FeatureKind{Descriptor::Dser, 0.5});
  CHECK(f[2] == FeatureKind{Descriptor::Plcr, 0.1});
  CHECK(f[3] == FeatureKind{Descriptor::SubcarrierCorr, 2.0});
  CHECK(f[4] == FeatureKind{Descriptor::Dser, 2.0});
  CHECK(slot_of({Descriptor::Dser, 2.0}) == 4u);
  CHECK_FALSE(slot_of({Descriptor::Dser, 1.0}).has_value());
}

TEST_CASE("compose_task_sets") {
  const auto tasks = default_tasks();
  REQUIRE(tasks.size() == 3);

  SUBCASE("singleton") {
    const auto set = compose_task_sets(std::span(tasks.data(), 1));
    CHECK(set.events == tasks[0].events);
    CHECK(set.features == tasks[0].features);
    CHECK(set.has_position);
  }
  SUBCASE("all three tasks cover every event and feature") {
    const auto set = compose_task_sets(tasks);
    CHECK(set.events.size() == kNumRealEvents);
    CHECK(set.features.size() == kNumSlots);
    CHECK(set.has_position);
  }
  SUBCASE("empty list") {
    CHECK_THROWS_AS(compose_task_sets(std::span<const TaskSpec>{}), ConfigError);
  }
  SUBCASE("associative") {
    const auto ab = compose_task_sets(std::span(tasks.data(), 2));
    const auto ab_c = compose_task_sets(ab, std::span(tasks.data() + 2, 1));
    CHECK(ab_c.same_sets(compose_task_sets(tasks)));
    CHECK(ab_c.tasks.size() == 3);
  }
}

TEST_CASE("compose_task_sets properties over random task lists") {
  std::mt19937_64 rng(5);
  const auto& feats = canonical_features();
  auto random_task = [&](int k) {
    TaskSpec t;
    t.name = "t" + std::to_string(k);
    for (RealEvent e : kAllRealEvents) {
      if (rng() % 2) t.events.insert(e);
    }
    if (t.events.empty()) t.events.insert(RealEvent::Absence);
    for (const auto& f : feats) {
      if (rng() % 2) t.features.insert(f);
    }
    if (t.features.empty()) t.features.insert(feats[0]);
    t.has_position = rng() % 3 == 0;
    return t;
  };
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TaskSpec> list;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int k = 0; k < n; ++k) list.push_back(random_task(k));
    const auto base = compose_task_sets(list);

    auto shuffled = list;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(compose_task_sets(shuffled).same_sets(base));

    auto doubled = list;
    doubled.insert(doubled.end(), list.begin(), list.end());
    const auto twice = compose_task_sets(doubled);
    CHECK(twice.same_sets(base));
    CHECK(twice.tasks.size() == list.size());

    const std::size_t cut = rng() % list.size();
    const auto left = compose_task_sets(std::span(list.data(), cut + 1));
    const auto joined = compose_task_sets(left, std::span(list.data() + cut + 1, list.size() - cut - 1));
    CHECK(joined.same_sets(base));
  }
}

TEST_CASE("task validation") {
  TaskSpec t{"x", {}, {canonical_features()[0]}, false};
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t.events = {RealEvent::Walking};
  t.features.insert(FeatureKind{Descriptor::Plcr, 0.3});
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("default range table") {
  const auto table = default_range_table();
  CHECK_NOTHROW(table.validate());
  CHECK(std::get<Interval>(table.lookup(RealEvent::Absence, Slot::CorrShort)) == Interval{0.1, 0.3});
  CHECK(std::get<Interval>(table.lookup(RealEvent::Stillness, Slot::DserShort)) == Interval{-5.2, -4.0});
  CHECK(std::get<Interval>(table.lookup(RealEvent::Stillness, Slot::DserLong)) == Interval{-5.0, -2.5});
  CHECK(std::holds_alternative<GeometricModel>(table.lookup(RealEvent::Walking, Slot::Plcr)));
  CHECK(std::holds_alternative<GeometricModel>(table.lookup(RealEvent::Walking, FeatureKind{Descriptor::Plcr, 0.1})));
  CHECK(table.geometric_cell_count() == 1);
  CHECK_THROWS_AS(table.lookup(RealEvent::Walking, FeatureKind{Descriptor::Plcr, 0.2}), ConfigError);
}

TEST_CASE("range table validation") {
  FeatureRangeTable t;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = default_range_table();
  t.set(RealEvent::Absence, Slot::CorrLong, Interval{0.5, 0.4});
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = default_range_table();
  t.set(RealEvent::Absence, Slot::CorrLong, GeometricModel{});
  CHECK_THROWS_AS(t.validate(), ConfigError);
}
