#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "trajmbm/hypothesis.hpp"

#include <cmath>
#include <set>
#include <vector>

using namespace trajmbm;

namespace {

Sth make_sth(int id, int created_at, double log_weight, double r,
             std::vector<MeasIndex> meas, std::vector<int> lineage,
             int consecutive_misses = 0) {
  Sth s;
  s.id = id;
  s.created_at = created_at;
  s.log_weight = log_weight;
  s.bern.r = r;
  s.bern.birth = created_at;
  s.bern.last = created_at + static_cast<int>(lineage.size()) - 1;
  s.meas_set = std::move(meas);
  s.lineage = std::move(lineage);
  s.consecutive_misses = consecutive_misses;
  return s;
}

GlobalHypothesis choose(std::vector<std::pair<int, int>> choice) {
  GlobalHypothesis h;
  h.choice = std::move(choice);
  return h;
}

int total_leaves(const HypothesisForest& f) {
  int n = 0;
  for (const Track& t : f.tracks) n += static_cast<int>(t.sths.size());
  return n;
}

}  // namespace

TEST_CASE("ancestor lookup follows the lineage and freezes for stale leaves") {
  const Sth s = make_sth(0, 3, 0.0, 0.5, {}, {7, 8, 9});
  CHECK(s.ancestor_at(2) == -1);
  CHECK(s.ancestor_at(3) == 7);
  CHECK(s.ancestor_at(4) == 8);
  CHECK(s.ancestor_at(5) == 9);
  CHECK(s.ancestor_at(11) == 9);  // no later branching: latest node persists
}

TEST_CASE("n_scan_prune leaves the forest unchanged when N covers all data") {
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  t.sths.push_back(make_sth(0, 1, 0.0, 0.5, {}, {0, 2, 4}));
  t.sths.push_back(make_sth(1, 1, -1.0, 0.9, {{3, 0}}, {1, 3, 5}));
  f.tracks.push_back(t);
  const GlobalHypothesis best = choose({{0, 0}});

  n_scan_prune(f, best, /*nscan=*/3, /*tau=*/3);  // horizon 0 precedes scan 1
  REQUIRE(f.tracks.size() == 1);
  CHECK(f.tracks[0].sths.size() == 2);
}

TEST_CASE("n_scan_prune removes the branch best does not use") {
  // Two branches diverging at the horizon scan itself.
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  t.sths.push_back(make_sth(0, 1, 0.0, 0.5, {}, {0, 2}));          // branch A
  t.sths.push_back(make_sth(1, 1, -1.0, 0.9, {{1, 0}}, {1, 3}));   // branch B
  f.tracks.push_back(t);

  n_scan_prune(f, choose({{0, 0}}), /*nscan=*/1, /*tau=*/2);  // horizon = 1
  REQUIRE(f.tracks.size() == 1);
  REQUIRE(f.tracks[0].sths.size() == 1);
  CHECK(f.tracks[0].sths[0].id == 0);
}

TEST_CASE("n_scan_prune three-scan forest matches hand enumeration") {
  // Lineages over scans 1..3; best uses node 1 at scan 1 and node 2 at scan 2.
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  t.sths.push_back(make_sth(10, 1, 0.0, 0.1, {}, {1, 2, 3}));
  t.sths.push_back(make_sth(11, 1, 0.0, 0.2, {{3, 0}}, {1, 2, 4}));
  t.sths.push_back(make_sth(12, 1, 0.0, 0.3, {{2, 1}}, {1, 5, 6}));
  t.sths.push_back(make_sth(13, 1, 0.0, 0.4, {{1, 0}}, {7, 8, 9}));
  f.tracks.push_back(t);

  SUBCASE("horizon at scan 1 keeps the root-1 branches") {
    n_scan_prune(f, choose({{0, 11}}), /*nscan=*/2, /*tau=*/3);
    std::set<int> ids;
    for (const Sth& s : f.tracks[0].sths) ids.insert(s.id);
    CHECK(ids == std::set<int>{10, 11, 12});
  }

  SUBCASE("horizon at scan 2 keeps only the node-2 descendants") {
    n_scan_prune(f, choose({{0, 11}}), /*nscan=*/1, /*tau=*/3);
    std::set<int> ids;
    for (const Sth& s : f.tracks[0].sths) ids.insert(s.id);
    CHECK(ids == std::set<int>{10, 11});
  }
}

TEST_CASE("n_scan_prune deletes tracks reduced to the non-existence hypothesis") {
  HypothesisForest f;
  Track keeper;
  keeper.id = 0;
  keeper.created_at = 1;
  keeper.sths.push_back(make_sth(0, 1, 0.0, 0.9, {{1, 0}}, {0, 1}));
  f.tracks.push_back(keeper);

  Track goner;
  goner.id = 1;
  goner.created_at = 1;
  goner.sths.push_back(make_sth(2, 1, 0.0, 0.0, {}, {2}));           // non-existence
  goner.sths.push_back(make_sth(3, 1, -2.0, 0.8, {{1, 1}}, {3, 4}));  // detection branch
  f.tracks.push_back(goner);

  n_scan_prune(f, choose({{0, 0}, {1, 2}}), /*nscan=*/1, /*tau=*/2);
  REQUIRE(f.tracks.size() == 1);
  CHECK(f.tracks[0].id == 0);
}

TEST_CASE("miss-only policy flags stale low-existence hypotheses") {
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  t.sths.push_back(make_sth(0, 1, 0.0, 0.05, {{2, 0}}, {0, 1, 2, 3, 4, 5}));  // stale
  t.sths.push_back(make_sth(1, 1, 0.0, 0.05, {{6, 0}}, {0, 1, 2, 3, 4, 6}));  // fresh
  t.sths.push_back(make_sth(2, 1, 0.0, 0.50, {{2, 1}}, {0, 1, 2, 3, 4, 7}));  // high r
  f.tracks.push_back(t);

  apply_miss_only_policy(f, choose({{0, 2}}), /*r_threshold=*/0.1,
                         /*max_consecutive_misses=*/10, /*window_start=*/5);
  CHECK(f.tracks[0].sths[0].miss_only);        // r below threshold, stale
  CHECK_FALSE(f.tracks[0].sths[1].miss_only);  // claims an in-window measurement
  CHECK_FALSE(f.tracks[0].sths[2].miss_only);  // existence above threshold
}

TEST_CASE("consecutive-miss pruning respects best and coverage protection") {
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  // Three miss chains over the limit plus one healthy leaf.
  t.sths.push_back(make_sth(0, 1, 0.0, 0.4, {{1, 0}}, {0, 1, 2, 3, 4}, 4));
  t.sths.push_back(make_sth(1, 1, -1.0, 0.3, {{1, 0}}, {0, 1, 2, 3, 5}, 4));
  t.sths.push_back(make_sth(2, 1, -2.0, 0.3, {{6, 0}}, {0, 1, 2, 3, 6}, 4));
  t.sths.push_back(make_sth(3, 1, 0.0, 0.9, {{1, 0}, {5, 1}}, {0, 1, 2, 3, 7}, 0));
  f.tracks.push_back(t);

  apply_miss_only_policy(f, choose({{0, 0}}), /*r_threshold=*/0.0,
                         /*max_consecutive_misses=*/3, /*window_start=*/5);
  std::set<int> ids;
  for (const Sth& s : f.tracks[0].sths) ids.insert(s.id);
  // 0 is best's choice; 2 is the only claimant of in-window measurement
  // (6,0); 1 is removable; 3 is under the miss limit.
  CHECK(ids == std::set<int>{0, 2, 3});
}

TEST_CASE("policy keeps a no-measurement option per in-window scan") {
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  // Only leaf 0 misses scan 6; removing it would leave the per-scan
  // subproblem of scan 6 without an unassigned option for this track.
  t.sths.push_back(make_sth(0, 1, 0.0, 0.2, {}, {0, 1, 2, 3, 4, 5}, 5));
  t.sths.push_back(make_sth(1, 1, 0.0, 0.9, {{6, 0}}, {0, 1, 2, 3, 4, 6}, 0));
  t.sths.push_back(make_sth(2, 1, 0.0, 0.8, {{6, 1}}, {0, 1, 2, 3, 4, 7}, 0));
  f.tracks.push_back(t);

  apply_miss_only_policy(f, choose({{0, 1}}), /*r_threshold=*/0.0,
                         /*max_consecutive_misses=*/3, /*window_start=*/5);
  REQUIRE(f.tracks[0].sths.size() == 3);  // nothing removable
}

TEST_CASE("dead stale tracks are deleted outright") {
  HypothesisForest f;
  Track t;
  t.id = 0;
  t.created_at = 1;
  Sth dying = make_sth(0, 1, 0.0, 1e-6, {{1, 0}}, {0, 1, 2, 3}, 3);
  t.sths.push_back(dying);
  f.tracks.push_back(t);

  apply_miss_only_policy(f, choose({{0, 0}}), /*r_threshold=*/0.1,
                         /*max_consecutive_misses=*/3, /*window_start=*/3);
  CHECK(f.tracks.empty());
}

TEST_CASE("enumerate_global_hypotheses basics") {
  SUBCASE("single track with two miss histories gives two hypotheses") {
    HypothesisForest f;
    Track t;
    t.id = 0;
    t.created_at = 1;
    t.sths.push_back(make_sth(0, 1, std::log(0.7), 0.5, {}, {0}));
    t.sths.push_back(make_sth(1, 1, std::log(0.3), 0.2, {}, {1}));
    f.tracks.push_back(t);
    const auto hyps = enumerate_global_hypotheses(f, 100);
    REQUIRE(hyps.size() == 2);
    double sum = 0.0;
    for (const auto& h : hyps) sum += std::exp(h.log_weight);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("combinations double-claiming a measurement are excluded") {
    HypothesisForest f;
    for (int i = 0; i < 2; ++i) {
      Track t;
      t.id = i;
      t.created_at = 1;
      t.sths.push_back(make_sth(2 * i, 1, 0.0, 0.0, {}, {2 * i}));
      t.sths.push_back(make_sth(2 * i + 1, 1, -1.0, 1.0, {{1, 0}}, {2 * i + 1}));
      f.tracks.push_back(t);
    }
    const auto hyps = enumerate_global_hypotheses(f, 100);
    REQUIRE(hyps.size() == 2);  // exactly one track claims (1,0) in each
    for (const auto& h : hyps) {
      int claims = 0;
      for (const auto& [track_id, sth_id] : h.choice) {
        if (sth_id % 2 == 1) ++claims;
      }
      CHECK(claims == 1);
    }
  }

  SUBCASE("weights e^-1 and e^-2 normalize to (0.731, 0.269)") {
    HypothesisForest f;
    Track t;
    t.id = 0;
    t.created_at = 1;
    t.sths.push_back(make_sth(0, 1, -1.0, 0.5, {}, {0}));
    t.sths.push_back(make_sth(1, 1, -2.0, 0.5, {}, {1}));
    f.tracks.push_back(t);
    const auto hyps = enumerate_global_hypotheses(f, 100);
    REQUIRE(hyps.size() == 2);
    CHECK(std::exp(hyps[0].log_weight) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(std::exp(hyps[1].log_weight) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  }

  SUBCASE("cap exceeded throws") {
    HypothesisForest f;
    for (int i = 0; i < 4; ++i) {
      Track t;
      t.id = i;
      t.created_at = 1;
      for (int a = 0; a < 4; ++a) t.sths.push_back(make_sth(4 * i + a, 1, 0.0, 0.5, {}, {4 * i + a}));
      f.tracks.push_back(t);
    }
    CHECK_THROWS_AS(enumerate_global_hypotheses(f, 100), std::runtime_error);
  }
}

TEST_CASE("forest size is monotone in N and in r_threshold") {
  auto build = [] {
    HypothesisForest f;
    Track t;
    t.id = 0;
    t.created_at = 1;
    t.sths.push_back(make_sth(10, 1, 0.0, 0.5, {}, {1, 2, 3}));
    t.sths.push_back(make_sth(11, 1, 0.0, 0.5, {{3, 0}}, {1, 2, 4}));
    t.sths.push_back(make_sth(12, 1, 0.0, 0.5, {{2, 1}}, {1, 5, 6}));
    t.sths.push_back(make_sth(13, 1, 0.0, 0.5, {{1, 0}}, {7, 8, 9}));
    f.tracks.push_back(t);
    // A second track: stale near-dead chains at assorted existence levels.
    Track u;
    u.id = 1;
    u.created_at = 1;
    u.sths.push_back(make_sth(20, 1, 0.0, 5e-5, {{1, 1}}, {20, 21, 22}, 2));
    u.sths.push_back(make_sth(21, 1, -0.5, 5e-2, {{1, 1}}, {20, 21, 23}, 2));
    f.tracks.push_back(u);
    return f;
  };

  int prev = -1;
  for (int nscan = 1; nscan <= 3; ++nscan) {
    HypothesisForest f = build();
    n_scan_prune(f, choose({{0, 11}, {1, 21}}), nscan, /*tau=*/3);
    const int size = total_leaves(f);
    if (prev >= 0) CHECK(size >= prev);  // larger N prunes less
    prev = size;
  }

  prev = -1;
  for (double thr : {0.0, 1e-3, 0.2}) {
    HypothesisForest f = build();
    apply_miss_only_policy(f, choose({{0, 11}, {1, 21}}), thr,
                           /*max_consecutive_misses=*/10, /*window_start=*/4);
    const int size = total_leaves(f);
    if (prev >= 0) CHECK(size <= prev);  // higher threshold flags and culls more
    prev = size;
  }
}
