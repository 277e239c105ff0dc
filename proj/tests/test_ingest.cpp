#include <doctest.h>

#include <set>

#include "dream/ingest.hpp"
#include "dream/log.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace dream;

namespace {

struct QuietWarnings {
  std::vector<std::string> seen;
  WarningSink previous;
  QuietWarnings() {
    previous = set_warning_sink([this](const std::string& m) { seen.push_back(m); });
  }
  ~QuietWarnings() { set_warning_sink(previous); }
};

std::vector<Interaction> complete(std::uint32_t m, std::uint32_t n) {
  std::vector<Interaction> xs;
  for (std::uint32_t u = 0; u < m; ++u) {
    for (std::uint32_t i = 0; i < n; ++i) xs.push_back({u, i});
  }
  return xs;
}

}  // namespace

TEST_CASE("load_interactions maps raw ids in order of appearance") {
  scratch::Dir dir("ingest");
  const auto log = load_interactions(dir.write("a.tsv", "a\tx\na\ty\nb\ty\n"));
  CHECK(log.interactions.size() == 3);
  CHECK(log.num_users() == 2);
  CHECK(log.num_items() == 2);
  CHECK(log.user_ids == std::vector<std::string>{"a", "b"});
  CHECK(log.interactions[2] == Interaction{1, 1});
}

TEST_CASE("load_interactions drops duplicates and ignores extra columns") {
  scratch::Dir dir("ingest");
  CHECK(load_interactions(dir.write("d.tsv", "a\tx\na\tx\n")).interactions.size() == 1);
  const auto log = load_interactions(dir.write("e.tsv", "a\tx\t1999\n\n"));
  CHECK(log.interactions.size() == 1);
  CHECK(log.item_ids == std::vector<std::string>{"x"});
}

TEST_CASE("load_interactions errors") {
  scratch::Dir dir("ingest");
  CHECK_THROWS_AS(load_interactions(dir.write("empty.tsv", "")), DataError);
  try {
    load_interactions(dir.write("bad.tsv", "a\tx\nlonely\n"));
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_interactions(dir / "missing.tsv"), DataError);
}

TEST_CASE("kcore_filter examples") {
  std::vector<Interaction> star;
  for (std::uint32_t i = 0; i < 5; ++i) star.push_back({0, i});
  CHECK_THROWS_AS(kcore_filter(star, 2), DataError);

  const auto full = complete(5, 5);
  CHECK(kcore_filter(full, 5).interactions.size() == 25);

  const std::vector<Interaction> chain{{0, 0}, {0, 1}, {1, 1}};
  CHECK_THROWS_AS(kcore_filter(chain, 2), DataError);
}

TEST_CASE("kcore_filter agrees with a brute-force peel") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const auto xs = oracle::random_interactions(30, 25, 0.2, rng);
    const std::size_t k = 1 + trial % 4;
    const auto want = oracle::kcore(xs, k);
    if (want.empty()) {
      CHECK_THROWS_AS(kcore_filter(xs, k), DataError);
      continue;
    }
    const auto got = kcore_filter(xs, k);
    std::set<std::pair<std::uint32_t, std::uint32_t>> mapped;
    for (const auto& x : got.interactions) mapped.insert({got.user_map[x.user], got.item_map[x.item]});
    CHECK(mapped == want);
    std::vector<std::size_t> udeg(got.user_map.size()), ideg(got.item_map.size());
    for (const auto& x : got.interactions) ++udeg[x.user], ++ideg[x.item];
    for (auto d : udeg) CHECK(d >= k);
    for (auto d : ideg) CHECK(d >= k);
  }
}

TEST_CASE("split_dataset per-user counts and determinism") {
  QuietWarnings quiet;
  std::vector<Interaction> xs;
  for (std::uint32_t i = 0; i < 10; ++i) xs.push_back({0, i});
  for (std::uint32_t i = 0; i < 3; ++i) xs.push_back({1, i});
  // every item also seen by a third user, so no held-out item is unseen in train
  for (std::uint32_t i = 0; i < 10; ++i) xs.push_back({2, i});
  const SplitRatios r{0.8, 0.1, 0.1};
  const auto s = split_dataset(xs, 3, r, 5);
  auto count = [](const std::vector<Interaction>& v, std::uint32_t u) {
    return std::count_if(v.begin(), v.end(), [u](const Interaction& x) { return x.user == u; });
  };
  CHECK(count(s.train, 0) + count(s.val, 0) + count(s.test, 0) == 10);
  CHECK(count(s.val, 0) <= 1);
  CHECK(count(s.test, 0) <= 1);
  CHECK(count(s.train, 1) >= 1);
  CHECK(count(s.val, 1) <= 1);
  CHECK(count(s.test, 1) <= 1);

  const auto again = split_dataset(xs, 3, r, 5);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
}

TEST_CASE("split_dataset gives 8/1/1 for a user with ten items when held-out items recur in train") {
  std::vector<Interaction> xs;
  for (std::uint32_t u = 0; u < 4; ++u) {
    for (std::uint32_t i = 0; i < 10; ++i) xs.push_back({u, i});
  }
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = split_dataset(xs, 4, {0.8, 0.1, 0.1}, seed);
    CHECK(s.train.size() == 32);
    CHECK(s.val.size() == 4);
    CHECK(s.test.size() == 4);
  }
}

TEST_CASE("split manifest round trip") {
  scratch::Dir dir("split");
  std::mt19937_64 rng(3);
  const auto xs = oracle::random_interactions(20, 20, 0.4, rng);
  QuietWarnings quiet;
  const auto s = split_dataset(xs, 20, {}, 9);
  save_split_manifest(dir / "split.json", s, 20, 20);
  std::size_t m = 0, n = 0;
  const auto back = load_split_manifest(dir / "split.json", &m, &n);
  CHECK(m == 20);
  CHECK(n == 20);
  CHECK(back.train == s.train);
  CHECK(back.test == s.test);
}

TEST_CASE("derive_user_features means") {
  QuietWarnings quiet;
  const ModalFeatureMatrix one{Modality::Vision, Tensor2D(1, 3, {1, 2, 3})};
  CHECK(derive_user_features(std::vector<Interaction>{{0, 0}}, 1, one).data == Tensor2D(1, 3, {1, 2, 3}));

  const ModalFeatureMatrix two{Modality::Vision, Tensor2D(2, 2, {1, 0, 0, 1})};
  CHECK(derive_user_features(std::vector<Interaction>{{0, 0}, {0, 1}}, 1, two).data == Tensor2D(1, 2, {0.5f, 0.5f}));

  const ModalFeatureMatrix three{Modality::Text, Tensor2D(3, 2, {2, 4, 4, 8, 0, 0})};
  const auto u = derive_user_features(std::vector<Interaction>{{0, 0}, {0, 1}, {0, 2}}, 2, three);
  CHECK(u.data.row(0)[0] == doctest::Approx(2.0));
  CHECK(u.data.row(0)[1] == doctest::Approx(4.0));
  CHECK(u.modality == Modality::Text);
  // user 1 has no training items
  CHECK(u.data.row(1)[0] == 0.0f);
  CHECK(quiet.seen.size() == 1);
}

TEST_CASE("feature files round trip and sidecar validation") {
  scratch::Dir dir("features");
  const ModalFeatureMatrix f{Modality::Text, Tensor2D(2, 3, {1, 2, 3, 4, 5, 6})};
  save_features(dir / "text", f);
  const auto back = load_features(dir / "text");
  CHECK(back.data == f.data);
  CHECK(back.modality == Modality::Text);

  dir.write("text.json", R"({"rows": 3, "dim": 3, "modality": "text"})");
  CHECK_THROWS_AS(load_features(dir / "text"), DataError);
  dir.write("text.json", "{not json");
  try {
    load_features(dir / "text");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("text.json") != std::string::npos);
  }

  const auto csv = load_features_csv(dir.write("v.csv", "1,2\n3,4\n"), Modality::Vision);
  CHECK(csv.data == Tensor2D(2, 2, {1, 2, 3, 4}));
}

TEST_CASE("align_item_features reorders by integer raw id") {
  const ModalFeatureMatrix raw{Modality::Vision, Tensor2D(3, 1, {10, 11, 12})};
  const std::vector<std::string> ids{"2", "0"};
  CHECK(align_item_features(raw, ids).data == Tensor2D(2, 1, {12, 10}));
  const std::vector<std::string> bad{"7"};
  CHECK_THROWS_AS(align_item_features(raw, bad), DataError);
}
