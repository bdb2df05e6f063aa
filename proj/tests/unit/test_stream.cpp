#include <algorithm>
#include <set>

#include "doctest.h"
#include "leadq/data.hpp"
#include "leadq/errors.hpp"
#include "leadq/stream.hpp"

using namespace leadq;

namespace {
Dataset tiny_dataset() { return make_synthetic_dataset(3, 2, 10, 0.3, 1); }
}  // namespace

TEST_CASE("oracle reveals the snapshotted label exactly once") {
  auto d = tiny_dataset();
  LabelOracle oracle(d);
  int lab = oracle.reveal(1, 0, 4);
  CHECK(lab == d.label(4));
  CHECK(oracle.total_reveals() == 1);
  CHECK(oracle.is_revealed(4));
  CHECK_FALSE(oracle.is_revealed(5));
  CHECK(oracle.revealed_label(4) == lab);
  CHECK_THROWS_AS(oracle.reveal(2, 1, 4), BudgetError);
  CHECK(oracle.total_reveals() == 1);
}

TEST_CASE("reading an unrevealed label is an audit violation") {
  auto d = tiny_dataset();
  LabelOracle oracle(d);
  CHECK_THROWS_AS(oracle.revealed_label(3), AuditViolation);
  oracle.reveal(1, 0, 3);
  CHECK(oracle.revealed_label(3) == d.label(3));
}

TEST_CASE("oracle validates index range and logs every reveal") {
  auto d = tiny_dataset();
  LabelOracle oracle(d);
  CHECK_THROWS_AS(oracle.reveal(1, 0, -1), DataError);
  CHECK_THROWS_AS(oracle.reveal(1, 0, static_cast<int>(d.size())), DataError);
  oracle.reveal(3, 2, 7);
  oracle.reveal(4, 0, 1);
  REQUIRE(oracle.log().size() == 2);
  CHECK(oracle.log()[0].round == 3);
  CHECK(oracle.log()[0].client == 2);
  CHECK(oracle.log()[0].dataset_index == 7);
  CHECK(oracle.log()[0].label == d.label(7));
  CHECK(oracle.log()[1].dataset_index == 1);
}

TEST_CASE("oracle restore rebuilds the revealed set") {
  auto d = tiny_dataset();
  LabelOracle a(d);
  a.reveal(1, 0, 2);
  a.reveal(2, 1, 8);
  LabelOracle b(d);
  b.restore(a.log());
  CHECK(b.total_reveals() == 2);
  CHECK(b.is_revealed(2));
  CHECK(b.revealed_label(8) == d.label(8));
  CHECK_THROWS_AS(b.reveal(3, 0, 2), BudgetError);
}

TEST_CASE("stream serves exact windows and never a partial one") {
  ClientStream s({5, 3, 9, 1, 7, 2, 8}, 3);
  CHECK(s.has_next_round());
  CHECK(s.next_arrivals() == std::vector<int>{5, 3, 9});
  CHECK(s.next_arrivals() == std::vector<int>{1, 7, 2});
  // One sample short of a window: stream ends cleanly.
  CHECK_FALSE(s.has_next_round());
  CHECK_THROWS_AS(s.next_arrivals(), DataError);
}

TEST_CASE("stream cursor supports checkpoint restore") {
  ClientStream s({4, 5, 6, 7}, 2);
  s.next_arrivals();
  CHECK(s.cursor() == 2);
  ClientStream fresh({4, 5, 6, 7}, 2);
  fresh.set_cursor(2);
  CHECK(fresh.next_arrivals() == std::vector<int>{6, 7});
  CHECK_THROWS_AS(fresh.set_cursor(9), DataError);
}

TEST_CASE("make_streams shuffles each shard into a full permutation") {
  std::vector<std::vector<int>> shards = {{0, 1, 2, 3, 4, 5}, {6, 7, 8}};
  auto streams = make_streams(shards, 2, 42);
  REQUIRE(streams.size() == 2);
  for (size_t k = 0; k < 2; ++k) {
    auto order = streams[k].order();
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == shards[k]);
  }
  // Deterministic per seed, distinct across clients.
  auto again = make_streams(shards, 2, 42);
  CHECK(again[0].order() == streams[0].order());
  CHECK(again[1].order() == streams[1].order());
}

TEST_CASE("arrival windows partition the shard in order") {
  std::vector<std::vector<int>> shards = {{10, 11, 12, 13, 14, 15, 16}};
  auto streams = make_streams(shards, 3, 1);
  auto& s = streams[0];
  std::set<int> seen;
  int rounds = 0;
  while (s.has_next_round()) {
    for (int idx : s.next_arrivals()) CHECK(seen.insert(idx).second);
    ++rounds;
  }
  CHECK(rounds == 2);     // 7 samples, window 3: final partial never served
  CHECK(seen.size() == 6);
}

TEST_CASE("stream rejects a nonpositive window") {
  CHECK_THROWS_AS(ClientStream({1, 2, 3}, 0), ConfigError);
}
