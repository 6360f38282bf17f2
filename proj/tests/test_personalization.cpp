#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pdpp/personalization.hpp"

using namespace pdpp;

namespace {

UserProfile profile(std::map<std::string, double> counts, std::size_t n = 0) {
  UserProfile p;
  p.user_id = "u";
  double total = 0.0;
  for (const auto& [g, c] : counts) total += c;
  p.genre_counts = std::move(counts);
  p.interaction_count = n > 0 ? n : static_cast<std::size_t>(std::llround(total));
  return p;
}

double oracle_entropy(std::vector<double> counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  double h = 0.0;
  for (double c : counts) {
    if (c > 0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

ItemCatalog catalog() {
  return ItemCatalog({{"a", "", {"A"}},
                      {"b", "", {"B"}},
                      {"c", "", {"C"}},
                      {"d", "", {"D"}},
                      {"ab", "", {"A", "B"}}});
}

}  // namespace

TEST_CASE("entropy examples") {
  CHECK(*compute_entropy(profile({{"A", 1}, {"B", 1}, {"C", 1}, {"D", 1}})) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(*compute_entropy(profile({{"A", 7}})) == 0.0);
  const double h = *compute_entropy(profile({{"A", 3}, {"B", 1}}));
  CHECK(h == doctest::Approx(oracle_entropy({3, 1})).epsilon(1e-15));
  CHECK(h == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK_FALSE(compute_entropy(UserProfile{}).has_value());
}

TEST_CASE("entropy is scale and order invariant") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int t = 0; t < 50; ++t) {
    std::map<std::string, double> c;
    std::map<std::string, double> doubled;
    for (const char* g : {"A", "B", "C", "D", "E"}) {
      c[g] = u(rng);
      doubled[g] = 2.0 * c[g];
    }
    const double h = *compute_entropy(profile(c, 10));
    CHECK(*compute_entropy(profile(doubled, 20)) == doctest::Approx(h).epsilon(1e-14));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(5.0) + 1e-12);
  }

  const auto cat = catalog();
  std::vector<std::pair<UserId, ItemId>> events = {
      {"u", "a"}, {"u", "b"}, {"u", "ab"}, {"u", "a"}, {"u", "c"}, {"u", "ab"}};
  const double ref = *compute_entropy(build_profiles(events, cat).front());
  for (int t = 0; t < 20; ++t) {
    std::shuffle(events.begin(), events.end(), rng);
    CHECK(*compute_entropy(build_profiles(events, cat).front()) ==
          doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("population stats") {
  std::vector<UserProfile> ps = {profile({{"A", 6}}), profile({{"A", 3}, {"B", 3}}),
                                 profile({{"A", 2}, {"B", 2}, {"C", 2}, {"D", 2}})};
  // H = 0, ln 2, ln 4
  auto s = compute_population_stats(ps, 5).stats;
  CHECK(s.h_min == 0.0);
  CHECK(s.h_max == doctest::Approx(std::log(4.0)));
  CHECK(s.population_size == 3);

  auto single = compute_population_stats({ps[1]}, 5).stats;
  CHECK(single.h_min == single.h_max);
  CHECK(single.h_min == doctest::Approx(std::log(2.0)));

  // Five users; the two cold ones hold the extreme entropies.
  std::vector<UserProfile> mixed = {
      profile({{"A", 1}}, 1),                                     // cold, H = 0
      profile({{"A", 1}, {"B", 1}, {"C", 1}, {"D", 1}}, 4),       // cold, H = ln 4
      profile({{"A", 3}, {"B", 3}}, 6),                           // warm, H = ln 2
      profile({{"A", 3}, {"B", 1}}, 5),                           // warm, H ~ 0.5623
      profile({{"A", 2}, {"B", 2}, {"C", 2}}, 6),                 // warm, H = ln 3
  };
  auto warm = compute_population_stats(mixed, 5);
  CHECK(warm.stats.population_size == 3);
  CHECK(warm.stats.h_min == doctest::Approx(oracle_entropy({3, 1})));
  CHECK(warm.stats.h_max == doctest::Approx(std::log(3.0)));
  std::size_t binned = 0;
  for (auto c : warm.histogram.counts) binned += c;
  CHECK(binned == 3);

  CHECK_THROWS_AS(compute_population_stats(mixed, 100), ConfigError);
  CHECK_THROWS_AS(compute_population_stats({}, 5), ConfigError);
}

TEST_CASE("normalize_f examples") {
  CHECK(normalize_f(0.0, {0.0, 2.0, 10}, 0.0) == 0.0);
  CHECK(normalize_f(1.0, {0.5, 2.0, 10}, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  for (double h : {0.0, 0.3, 1.0, 1.9}) {
    CHECK(std::abs(normalize_f(h, {0.2, 1.9, 10}, 1e6) - 1.0) <= 1e-3);
  }
  CHECK(normalize_f(1.0, {1.0, 1.0, 4}, 0.0) == 1.0);
  CHECK(normalize_f(3.0, {0.0, 2.0, 4}, 0.0) == 1.0);
  CHECK(normalize_f(-1.0, {0.0, 2.0, 4}, 0.0) == 0.0);
  CHECK_THROWS_AS(normalize_f(1.0, {0.0, 2.0, 4}, -0.1), ArgumentError);
}

TEST_CASE("normalize_f properties") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    double a = u(rng);
    double b = u(rng);
    const EntropyStats s{std::min(a, b), std::max(a, b), 10};
    const double h1 = s.h_min + (s.h_max - s.h_min) * u(rng) / 3.0;
    const double h2 = s.h_min + (s.h_max - s.h_min) * u(rng) / 3.0;
    const double l1 = u(rng);
    const double l2 = l1 + u(rng);
    // Monotone in H.
    if (h1 <= h2) CHECK(normalize_f(h1, s, l1) <= normalize_f(h2, s, l1) + 1e-15);
    // Monotone in l below h_max, bounded above by 1.
    if (h1 < s.h_max) {
      CHECK(normalize_f(h1, s, 0.0) <= normalize_f(h1, s, l1) + 1e-15);
      CHECK(normalize_f(h1, s, l1) <= normalize_f(h1, s, l2) + 1e-15);
    }
    CHECK(normalize_f(h1, s, l2) <= 1.0);
    // l = h_min is max-normalization.
    if (s.h_max > 0) CHECK(normalize_f(h1, s, s.h_min) == doctest::Approx(h1 / s.h_max).epsilon(1e-12));
  }
}

TEST_CASE("alpha examples") {
  PersonalizationParams params;
  params.alpha_0 = 0.6;
  // f = 0.5: H halfway between h_min and h_max with l = 0.
  auto warm = profile({{"A", 3}, {"B", 3}}, 6);
  const EntropyStats half{0.0, 2.0 * std::log(2.0), 10};
  CHECK(alpha_for_user(warm, half, params) == doctest::Approx(0.3).epsilon(1e-15));

  CHECK(alpha_for_user(UserProfile{}, half, params) == 0.6);
  auto d = decide_alpha(UserProfile{}, half, params);
  CHECK(d.cold_start);

  const EntropyStats top{0.0, std::log(2.0), 10};
  CHECK(alpha_for_user(warm, top, params) == doctest::Approx(0.6).epsilon(1e-15));

  // Below the cold-start threshold the shared alpha is used even with history.
  CHECK(alpha_for_user(profile({{"A", 4}}, 4), top, params) == 0.6);

  params.alpha_0 = 1.5;
  CHECK_THROWS_AS(params.validate(), ArgumentError);
  params.alpha_0 = 0.5;
  params.l = -1.0;
  CHECK_THROWS_AS(params.validate(), ArgumentError);
}

TEST_CASE("alpha stays within [0, alpha_0]") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const EntropyStats s{0.2, 1.2, 10};
  for (int t = 0; t < 200; ++t) {
    PersonalizationParams p;
    p.alpha_0 = u(rng);
    p.l = u(rng);
    auto prof = profile({{"A", 1 + 10 * u(rng)}, {"B", 10 * u(rng)}, {"C", 10 * u(rng)}}, 12);
    const double a = alpha_for_user(prof, s, p);
    CHECK(a >= 0.0);
    CHECK(a <= p.alpha_0);
  }
}

TEST_CASE("apply_event examples") {
  const auto cat = catalog();
  UserProfile p;
  p.user_id = "u";
  CHECK_FALSE(apply_event(p, {"u", "a", std::nullopt, "download", std::nullopt}, cat));
  CHECK(p.genre_counts == std::map<std::string, double>{{"A", 1.0}});
  CHECK(p.interaction_count == 1);

  CHECK_FALSE(apply_event(p, {"u", "ab", std::nullopt, "download", std::nullopt}, cat));
  CHECK(p.genre_counts == std::map<std::string, double>{{"A", 1.5}, {"B", 0.5}});
  CHECK(p.interaction_count == 2);

  const auto before = p.genre_counts;
  auto dead = apply_event(p, {"u", "nope", 3.0, "rating", 4.0}, cat);
  REQUIRE(dead.has_value());
  CHECK(dead->event.item_id == "nope");
  CHECK(p.genre_counts == before);
  CHECK(p.interaction_count == 2);

  // Replays double-count.
  apply_event(p, {"u", "a", std::nullopt, "download", std::nullopt}, cat);
  CHECK(p.genre_counts.at("A") == 2.5);
}

TEST_CASE("event parsing") {
  auto ev = parse_event(R"({"user_id":"u1","item_id":42,"ts":1.5,"event":"rating","value":4})");
  CHECK(ev.user_id == "u1");
  CHECK(ev.item_id == "42");
  CHECK(ev.ts == 1.5);
  CHECK(ev.value == 4.0);
  CHECK(ev.event == "rating");
  auto bare = parse_event(R"({"user_id":7,"item_id":"x","event":"download"})");
  CHECK_FALSE(bare.ts.has_value());
  CHECK_FALSE(bare.value.has_value());

  CHECK_THROWS_AS(parse_event("{"), IngestError);
  CHECK_THROWS_AS(parse_event("[]"), IngestError);
  CHECK_THROWS_AS(parse_event(R"({"item_id":"x","event":"download"})"), IngestError);
  CHECK_THROWS_AS(parse_event(R"({"user_id":"u","item_id":"x","event":"click"})"), IngestError);
  CHECK_THROWS_AS(parse_event(R"({"user_id":"u","item_id":"x","event":"download","value":"hi"})"),
                  IngestError);

  CHECK(event_type_accepted(ev, {}));
  CHECK(event_type_accepted(ev, {"rating"}));
  CHECK_FALSE(event_type_accepted(ev, {"download"}));
}

TEST_CASE("alpha index build, lookup and snapshot round trip") {
  const auto cat = catalog();
  std::vector<std::pair<UserId, ItemId>> events;
  for (int i = 0; i < 6; ++i) events.emplace_back("focused", "a");
  for (const char* it : {"a", "b", "c", "d", "a", "b"}) events.emplace_back("broad", it);
  for (const char* it : {"a", "a", "a", "b", "ab"}) events.emplace_back("mid", it);
  events.emplace_back("new", "c");
  events.emplace_back("new", "missing");

  std::size_t unknown = 0;
  const auto profiles = build_profiles(events, cat, &unknown);
  CHECK(unknown == 1);
  PersonalizationParams params;
  params.alpha_0 = 0.5;
  const auto index = build_alpha_index(profiles, params);
  CHECK(index.records.size() == 4);
  CHECK(index.stats.population_size == 3);
  CHECK(index.stats.h_min == 0.0);
  CHECK(index.lookup("focused").alpha == 0.0);
  CHECK(index.lookup("broad").alpha == doctest::Approx(0.5));
  CHECK(index.lookup("new").cold_start);
  CHECK(index.lookup("new").alpha == 0.5);
  CHECK(index.lookup("stranger").cold_start);
  CHECK(index.lookup("stranger").alpha == 0.5);

  std::stringstream buf;
  write_alpha_snapshot(buf, index);
  const auto text = buf.str();
  CHECK(text.find("user_id,H,f_u,alpha_u,interaction_count") != std::string::npos);
  CHECK(text.find("broad,") < text.find("focused,"));

  std::istringstream in(text);
  const auto back = read_alpha_snapshot(in, PersonalizationParams{});
  CHECK(back.params.alpha_0 == 0.5);
  CHECK(back.stats.h_min == index.stats.h_min);
  CHECK(back.stats.h_max == index.stats.h_max);
  REQUIRE(back.records.size() == index.records.size());
  for (const auto& [user, rec] : index.records) {
    const auto& r = back.records.at(user);
    CHECK(r.alpha == rec.alpha);
    CHECK(r.f == rec.f);
    CHECK(r.entropy == rec.entropy);
    CHECK(r.interaction_count == rec.interaction_count);
  }

  // Order independence over event permutations.
  std::mt19937_64 rng(2);
  auto shuffled = events;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto again = build_alpha_index(build_profiles(shuffled, cat), params);
  for (const auto& [user, rec] : index.records) {
    CHECK(again.records.at(user).alpha == doctest::Approx(rec.alpha).epsilon(1e-14));
  }
}

TEST_CASE("malformed snapshots are rejected") {
  const PersonalizationParams defaults;
  auto reject = [&](const std::string& text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_alpha_snapshot(in, defaults), IngestError);
  };
  reject("");
  reject("user,alpha\nu,0.1\n");
  reject("user_id,H,f_u,alpha_u,interaction_count\nu,0.1,0.5\n");
  reject("user_id,H,f_u,alpha_u,interaction_count\nu,x,0.5,0.3,6\n");
  reject("user_id,H,f_u,alpha_u,interaction_count\nu,0.1,0.5,0.3,6\nu,0.1,0.5,0.3,6\n");
  reject("# alpha_0=2\nuser_id,H,f_u,alpha_u,interaction_count\n");

  // Stats recomputed from warm rows when absent.
  std::istringstream ok(
      "user_id,H,f_u,alpha_u,interaction_count\na,0.2,0,0,6\nb,1.2,1,0.6,9\nc,5,1,0.6,1\n");
  const auto idx = read_alpha_snapshot(ok, defaults);
  CHECK(idx.stats.h_min == 0.2);
  CHECK(idx.stats.h_max == 1.2);
}
