#include <doctest.h>

#include <random>

#include "parsejargon/error.hpp"
#include "parsejargon/scheduler.hpp"
#include "support.hpp"

using namespace parsejargon;
using testing::error_code;

TEST_SUITE("scheduler") {

TEST_CASE("push") {
  DisplayState s;
  CHECK(s.min_display_ms() == 7000);
  auto change = s.push("A", 0);
  REQUIRE(change);
  CHECK(*change == DisplayChange{"A", 0, 0});
  CHECK(s.current() == "A");

  CHECK_FALSE(s.push("B", 3000));
  CHECK(s.current() == "A");
  CHECK(s.queue() == std::deque<std::string>{"B"});

  DisplayState late;
  late.push("A", 0);
  change = late.push("B", 10000);
  REQUIRE(change);
  CHECK(change->key == "B");
  CHECK(late.shown_since_ms() == 10000);
}

TEST_CASE("push waits behind a non-empty queue") {
  DisplayState s;
  s.push("A", 0);
  s.push("B", 1000);
  CHECK_FALSE(s.push("C", 9000));  // B is owed the slot first
  CHECK(s.tick(9000)->key == "B");
  CHECK(s.queue() == std::deque<std::string>{"C"});
}

TEST_CASE("tick") {
  auto s = DisplayState::restore("A", 0, {"B", "C"}, 7000);
  CHECK_FALSE(s.tick(6999));
  auto change = s.tick(7000);
  REQUIRE(change);
  CHECK(*change == DisplayChange{"B", 7000, 1});
  CHECK(s.queue() == std::deque<std::string>{"C"});

  auto alone = DisplayState::restore("A", 0, {}, 7000);
  CHECK_FALSE(alone.tick(60000));
  CHECK(alone.current() == "A");

  DisplayState empty;
  CHECK_FALSE(empty.tick(100000));
  CHECK_FALSE(empty.current());
}

TEST_CASE("duplicate keys and invalid configuration") {
  DisplayState s;
  s.push("A", 0);
  s.push("B", 1);
  CHECK(error_code([&] { s.push("A", 2); }) == ErrorCode::DuplicateKey);
  CHECK(error_code([&] { s.push("B", 2); }) == ErrorCode::DuplicateKey);
  CHECK(error_code([] { DisplayState bad(0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("property: hold time, FIFO order and no starvation") {
  constexpr int64_t kMin = kDefaultMinDisplayMs;
  constexpr int64_t kTick = kDefaultTickMs;
  for (uint32_t seed = 0; seed < 1000; ++seed) {
    std::mt19937 rng(seed);
    DisplayState s;
    struct Shown {
      std::string key;
      int64_t at;
    };
    std::vector<std::string> pushed;
    std::vector<int64_t> pushed_at;
    std::vector<Shown> shown;
    auto record = [&](const std::optional<DisplayChange>& c) {
      if (c) shown.push_back({c->key, c->shown_since_ms});
    };

    int64_t now = 0;
    int64_t next_tick = kTick;
    int pushes = 1 + rng() % 15;
    for (int i = 0; i < pushes; ++i) {
      // pushes land anywhere between ticks; bursts are common
      int64_t gap = rng() % 3 == 0 ? 0 : std::uniform_int_distribution<int64_t>(0, 12000)(rng);
      int64_t at = now + gap;
      while (next_tick <= at) {
        record(s.tick(next_tick));
        now = next_tick;
        next_tick += kTick;
      }
      now = at;
      std::string key = "k" + std::to_string(i);
      pushed.push_back(key);
      pushed_at.push_back(at);
      record(s.push(key, at));
    }
    // keep ticking until the queue drains
    int64_t deadline = now + static_cast<int64_t>(pushes + 1) * (kMin + kTick);
    while (!s.queue().empty() && next_tick <= deadline) {
      record(s.tick(next_tick));
      next_tick += kTick;
    }

    INFO("seed " << seed);
    REQUIRE(s.queue().empty());
    REQUIRE(shown.size() == pushed.size());
    for (std::size_t i = 0; i < shown.size(); ++i) {
      REQUIRE(shown[i].key == pushed[i]);  // FIFO
      REQUIRE(shown[i].at >= pushed_at[i]);
      if (i == 0) continue;
      int64_t held = shown[i].at - shown[i - 1].at;
      REQUIRE(held >= kMin);
      // a waiting successor takes over within one tick of becoming eligible
      int64_t eligible = std::max(pushed_at[i], shown[i - 1].at + kMin);
      REQUIRE(shown[i].at - eligible <= kTick);
    }
  }
}

}  // TEST_SUITE
