#include <doctest.h>

#include <algorithm>
#include <random>

#include "csync.hpp"
#include "csync_oracle.hpp"
#include "support.hpp"
#include "synth.hpp"

using namespace tracklens;
using tltest::psl;
using tltest::TraceBuilder;

namespace {

// Brute force: every maximal substring free of delimiters.
std::vector<std::string> oracle_split(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (tltest::oracle_delim(s[i]) || (i > 0 && !tltest::oracle_delim(s[i - 1]))) continue;
    std::size_t j = i;
    while (j < s.size() && !tltest::oracle_delim(s[j])) ++j;
    out.push_back(s.substr(i, j - i));
  }
  return out;
}

// The same cookie in `crawls` stateful crawls of one site.
std::vector<CrawlTrace> cookie_visits(const std::string& setter, const std::string& value, int crawls = 2,
                                      std::optional<std::int64_t> lifetime = 365 * tltest::kDay) {
  std::vector<CrawlTrace> out;
  for (int c = 1; c <= crawls; ++c) {
    TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft), "stateful-" + std::to_string(c));
    b.cookie(setter, "uid", value, lifetime);
    out.push_back(b.build());
  }
  return out;
}

std::set<std::string> tokens_of(const std::vector<UserId>& ids) {
  std::set<std::string> out;
  for (const auto& id : ids) out.insert(id.token);
  return out;
}

UserId make_id(std::string token, std::string origin) {
  UserId id;
  id.token = std::move(token);
  id.origin_domain = std::move(origin);
  id.cookie_name = "uid";
  id.crawl_ids = {"stateful-1", "stateful-2"};
  return id;
}

SyncEvent ev(std::string token, std::string sender, std::string receiver, std::string site = "news-site.com") {
  SyncEvent e;
  e.token = std::move(token);
  e.sender = std::move(sender);
  e.receiver = std::move(receiver);
  e.visit_site = std::move(site);
  return e;
}

LabelSet roster(std::size_t left, std::size_t centre, std::size_t right) {
  std::vector<SiteLabel> v;
  for (std::size_t i = 0; i < left; ++i) v.push_back(tltest::label("l" + std::to_string(i) + ".com", Leaning::kLeft));
  for (std::size_t i = 0; i < centre; ++i) v.push_back(tltest::label("c" + std::to_string(i) + ".com", Leaning::kCentre));
  for (std::size_t i = 0; i < right; ++i) v.push_back(tltest::label("r" + std::to_string(i) + ".com", Leaning::kRight));
  return LabelSet(v);
}

}  // namespace

TEST_CASE("delimiters") {
  for (char c : std::string("=&;:,?/ \t\n")) CHECK(is_token_delimiter(c));
  for (char c : std::string("-_.aZ0%+")) CHECK_FALSE(is_token_delimiter(c));
}

TEST_CASE("split_tokens matches a brute-force splitter") {
  CHECK(split_tokens("tokenA12345&tokenB6789012") == std::vector<std::string_view>{"tokenA12345", "tokenB6789012"});
  std::mt19937_64 rng(1);
  const std::string alphabet = "ab-_.=&;:,?/ %";
  for (int i = 0; i < 500; ++i) {
    std::string s(rng() % 30, 'a');
    for (auto& c : s) c = alphabet[rng() % alphabet.size()];
    const auto got = split_tokens(s);
    CHECK(std::vector<std::string>(got.begin(), got.end()) == oracle_split(s));
  }
}

TEST_CASE("extract_ids examples") {
  SUBCASE("UUID-style token survives") {
    const auto ids = extract_ids(cookie_visits("adnexus.com", "id=c3514a4b-11de-4cce-b428-365a3f6294b1-tuct65bc2e7"),
                                 psl(), {});
    REQUIRE(ids.size() == 1);
    CHECK(ids[0].token == "c3514a4b-11de-4cce-b428-365a3f6294b1-tuct65bc2e7");
    CHECK(ids[0].origin_domain == "adnexus.com");
    CHECK(ids[0].crawl_ids.size() == 2);
  }
  SUBCASE("short value") {
    CHECK(extract_ids(cookie_visits("adnexus.com", "abc"), psl(), {}).empty());
  }
  SUBCASE("two tokens") {
    const auto ids = extract_ids(cookie_visits("adnexus.com", "tokenA12345&tokenB6789012"), psl(), {});
    CHECK(tokens_of(ids) == std::set<std::string>{"tokenA12345", "tokenB6789012"});
    std::size_t shortest = 1000;
    for (const auto& id : ids) shortest = std::min(shortest, id.token.size());
    CHECK(shortest == 11);
  }
  SUBCASE("percent-encoded value") {
    const auto ids = extract_ids(cookie_visits("adnexus.com", "a%3D8c41d2e9b7a3ff"), psl(), {});
    CHECK(tokens_of(ids).count("8c41d2e9b7a3ff") == 1);
  }
  SUBCASE("setter host maps to its registrable domain") {
    const auto ids = extract_ids(cookie_visits(".cdn.adnexus.co.uk", "8c41d2e9b7a3ff"), psl(), {});
    REQUIRE(ids.size() == 1);
    CHECK(ids[0].origin_domain == "adnexus.co.uk");
  }
}

TEST_CASE("eligibility rules") {
  const std::string tok = "8c41d2e9b7a3ff01";
  CHECK(extract_ids(cookie_visits("a.com", tok, 2, 30 * tltest::kDay), psl(), {}).empty());
  CHECK(extract_ids(cookie_visits("a.com", tok, 2, 30 * tltest::kDay + 1), psl(), {}).size() == 1);
  CHECK(extract_ids(cookie_visits("a.com", tok, 2, std::nullopt), psl(), {}).empty());
  CHECK(extract_ids(cookie_visits("a.com", tok, 1), psl(), {}).empty());
  CHECK(extract_ids(cookie_visits("a.com", tok, 2, -tltest::kDay), psl(), {}).empty());
  CHECK(extract_ids(cookie_visits("a.com", std::string(128, 'a')), psl(), {}).size() == 1);
  CHECK(extract_ids(cookie_visits("a.com", std::string(129, 'a')), psl(), {}).empty());
  CHECK(extract_ids(cookie_visits("a.com", std::string(10, 'a')), psl(), {}).empty());

  auto stateless = cookie_visits("a.com", tok);
  for (auto& t : stateless) t.crawl_mode = CrawlMode::kStateless;
  CHECK(extract_ids(stateless, psl(), {}).empty());

  CsyncOptions loose;
  loose.min_id_len = 8;
  loose.min_crawls = 1;
  loose.min_cookie_days = 7;
  CHECK(extract_ids(cookie_visits("a.com", "abcdefghij", 1, 8 * tltest::kDay), psl(), loose).size() == 1);
}

TEST_CASE("eligibility property over generated cookies") {
  std::mt19937_64 rng(77);
  std::vector<CrawlTrace> traces;
  struct Planted {
    std::string token;
    std::size_t crawls;
    std::optional<std::int64_t> lifetime;
  };
  std::vector<Planted> planted;
  for (int i = 0; i < 400; ++i) {
    Planted p;
    p.token = std::string(8 + rng() % 8, 'a');
    for (auto& c : p.token) c = "0123456789abcdef"[rng() % 16];
    p.token += std::to_string(i);
    p.crawls = 1 + rng() % 3;
    const std::int64_t days[] = {1, 29, 30, 31, 365};
    const std::int64_t fuzz[] = {-1, 0, 1};
    if (rng() % 6) p.lifetime = days[rng() % 5] * tltest::kDay + fuzz[rng() % 3];
    planted.push_back(p);
  }
  for (int c = 1; c <= 3; ++c) {
    TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft), "stateful-" + std::to_string(c));
    for (std::size_t i = 0; i < planted.size(); ++i)
      if (static_cast<std::size_t>(c) <= planted[i].crawls)
        b.cookie("t" + std::to_string(i) + ".com", "id", planted[i].token, planted[i].lifetime);
    traces.push_back(b.build());
  }
  std::set<std::string> expected;
  for (const auto& p : planted)
    if (p.token.size() >= 11 && p.lifetime && *p.lifetime > 30 * tltest::kDay && p.crawls >= 2)
      expected.insert(p.token);
  const auto ids = extract_ids(traces, psl(), {});
  CHECK(tokens_of(ids) == expected);
  CHECK(expected.size() > 20);
  for (const auto& id : ids) CHECK(id.token.size() >= 11);
}

TEST_CASE("request URL sync between two trackers") {
  const std::string token = "5b1c9e0a-77f3-4d2e-9c41-8a";
  REQUIRE(token.size() == 26);
  const std::string tok27 = token + "f";
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.request("https://sync.trackerB.com/px?uid=" + tok27, "https://trackerA.com/frame");
  b.response("https://sync.trackerB.com/px?uid=" + tok27, 200);
  const std::vector<CrawlTrace> traces = {b.build()};
  const std::vector<UserId> ids = {make_id(tok27, "trackera.com")};
  const auto events = detect_syncs(traces, ids, psl());
  REQUIRE(events.size() == 1);
  CHECK(events[0].sender == "trackera.com");
  CHECK(events[0].receiver == "trackerb.com");
  CHECK(events[0].channel == SyncChannel::kRequestUrl);
  CHECK_FALSE(events[0].sender_inferred);
  CHECK(events[0].evidence_event_id == traces[0].events[0].event_id);
  CHECK(events == tltest::brute_force_syncs(traces, ids, psl()));
}

TEST_CASE("mid-token matches are rejected") {
  const std::string tok = "8c41d2e9b7a3ff01";
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.request("https://b.com/px?uid=x" + tok);
  b.request("https://b.com/px?uid=" + tok + "-2");
  b.request("https://b.com/px?uid=" + tok.substr(1));
  CHECK(detect_syncs(std::vector<CrawlTrace>{b.build()}, std::vector<UserId>{make_id(tok, "a.com")}, psl()).empty());
}

TEST_CASE("token sent back to its own origin is not a sync") {
  const std::string tok = "8c41d2e9b7a3ff01";
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.request("https://px.trackera.com/c?uid=" + tok);
  b.request("https://px.trackera.com/c?uid=" + tok, b.page());
  b.request("https://px.trackera.com/c?uid=" + tok, "https://cdn.trackera.com/tag.js");
  const std::vector<CrawlTrace> traces = {b.build()};
  const std::vector<UserId> ids = {make_id(tok, "trackera.com")};
  CHECK(detect_syncs(traces, ids, psl()).empty());
  CHECK(tltest::brute_force_syncs(traces, ids, psl()).empty());
}

TEST_CASE("inferred sender is the visited site") {
  const std::string tok = "8c41d2e9b7a3ff01";
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.request("https://sync.trackerb.com/c?uid=" + tok);
  const auto events = detect_syncs(std::vector<CrawlTrace>{b.build()}, std::vector<UserId>{make_id(tok, "trackera.com")}, psl());
  REQUIRE(events.size() == 1);
  CHECK(events[0].sender == "news-site.com");
  CHECK(events[0].sender_inferred);
  CHECK(event_is_fp_tp(events[0], psl()));
  CHECK_FALSE(event_is_tp_tp(events[0], psl()));
}

TEST_CASE("redirect location sync") {
  const std::string tok = "mf.8c41d2e9b7a3";
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  const std::string location = "https://cm.clickgrid.io/set?partner=mf&puid=" + tok;
  b.request("https://t.metricflow.com/sync", b.page());
  b.redirect("https://t.metricflow.com/sync", location);
  b.request(location, b.page());
  b.response(location, 204);
  const std::vector<CrawlTrace> traces = {b.build()};
  const std::vector<UserId> ids = {make_id(tok, "metricflow.com")};
  const auto events = detect_syncs(traces, ids, psl());
  REQUIRE(events.size() == 1);
  CHECK(events[0].channel == SyncChannel::kRedirectLocation);
  CHECK(events[0].sender == "metricflow.com");
  CHECK(events[0].receiver == "clickgrid.io");
  CHECK(events[0].evidence_url == location);
  CHECK(events == tltest::brute_force_syncs(traces, ids, psl()));
}

TEST_CASE("referrer channel and percent-encoded tokens") {
  const std::string tok = "8c41d2e9-b7a3-ff01";
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.request("https://collect.trackerb.com/c", "https://frame.trackerc.com/?partner_uid=" + tok);
  b.request("https://trackerd.com/r?next=https%3A%2F%2Fcm.x.com%2Fset%3Fuid%3D" + tok, "https://frame.trackerc.com/");
  const std::vector<CrawlTrace> traces = {b.build()};
  const std::vector<UserId> ids = {make_id(tok, "trackera.com")};
  const auto events = detect_syncs(traces, ids, psl());
  REQUIRE(events.size() == 2);
  CHECK(events[0].channel == SyncChannel::kReferrer);
  CHECK(events[0].sender == "trackerc.com");
  CHECK(events[0].receiver == "trackerb.com");
  CHECK(events[1].channel == SyncChannel::kRequestUrl);
  CHECK(events[1].receiver == "trackerd.com");
  CHECK(events == tltest::brute_force_syncs(traces, ids, psl()));
}

TEST_CASE("the earliest owner stands for a shared token") {
  const std::string tok = "8c41d2e9b7a3ff01";
  UserId late = make_id(tok, "a.com"), early = make_id(tok, "z.com");
  late.first_seen = 20;
  early.first_seen = 10;
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.request("https://b.com/?u=" + tok, "https://q.com/");
  const auto events = detect_syncs(std::vector<CrawlTrace>{b.build()}, std::vector<UserId>{late, early}, psl());
  REQUIRE(events.size() == 1);
  CHECK(events[0].origin_domain == "z.com");
}

TEST_CASE("detect_syncs equals the brute-force scan on random corpora") {
  for (std::uint64_t seed = 100; seed < 106; ++seed) {
    CAPTURE(seed);
    const auto c = tltest::random_corpus(seed, 2000, 150);
    const auto fast = detect_syncs(c.traces, c.ids, psl());
    const auto slow = tltest::brute_force_syncs(c.traces, c.ids, psl());
    CHECK(fast.size() == slow.size());
    CHECK(fast == slow);
    CHECK(fast.size() > 50);
    for (const auto& e : fast) {
      CHECK(e.token.size() >= 11);
      CHECK(e.sender != e.receiver);
      CHECK(tltest::oracle_contains(e.evidence_url, e.token));
    }
  }
}

TEST_CASE("adding a trace never removes events") {
  const auto c = tltest::random_corpus(7, 1200, 100);
  std::vector<CrawlTrace> some(c.traces.begin(), c.traces.end() - 2);
  CHECK(detect_syncs(some, c.ids, psl()).size() <= detect_syncs(c.traces, c.ids, psl()).size());
}

TEST_CASE("pair enumeration") {
  CHECK(enumerate_pairs(roster(39, 0, 37), Leaning::kLeft, Leaning::kRight).size() == 1443);
  CHECK(enumerate_pairs(roster(39, 0, 37), Leaning::kRight, Leaning::kLeft).size() == 1443);
  CHECK(enumerate_pairs(roster(0, 0, 37), Leaning::kRight, Leaning::kRight).size() == 666);
  CHECK(enumerate_pairs(roster(1, 0, 0), Leaning::kLeft, Leaning::kLeft).empty());

  std::vector<SiteLabel> dual = {tltest::label("a.com", Leaning::kLeft), tltest::label("a.com", Leaning::kLeft, Platform::kMobile),
                                 tltest::label("b.com", Leaning::kLeft)};
  const auto pairs = enumerate_pairs(LabelSet(dual), Leaning::kLeft, Leaning::kLeft);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].first != pairs[0].second);

  for (std::size_t n = 1; n <= 12; ++n)
    for (std::size_t m = 1; m <= 12; ++m) {
      const auto labels = roster(n, m, 0);
      CHECK(enumerate_pairs(labels, Leaning::kLeft, Leaning::kCentre).size() == n * m);
      CHECK(enumerate_pairs(labels, Leaning::kLeft, Leaning::kLeft).size() == n * (n - 1) / 2);
    }
}

TEST_CASE("table rows and names") {
  const auto& rows = table_group_pairs();
  REQUIRE(rows.size() == 6);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.name());
  CHECK(names == std::vector<std::string>{"Right-Right", "Left-Left", "Centre-Centre", "Right-Left", "Right-Centre",
                                          "Left-Centre"});
}

TEST_CASE("pair metrics arithmetic") {
  SUBCASE("two events on one ID") {
    const std::vector<SyncEvent> events = {ev("tok1234567890", "a.com", "b.com"), ev("tok1234567890", "b.com", "c.com")};
    const auto m = pair_metrics("Left-Left", events, 1, psl());
    CHECK(m.avg_syncs_per_unique_id == 2.0);
    CHECK(m.tp_tp_syncs == 2);
    CHECK(m.tp_tp_domain_pairs == 2);
    CHECK(m.zero_fp_tp_pairs);
    CHECK(m.avg_syncs_per_fp_tp_pair == 0.0);
  }
  SUBCASE("nine TP-TP events over two unordered pairs") {
    std::vector<SyncEvent> events;
    for (int i = 0; i < 5; ++i) events.push_back(ev("tok1234567890", i % 2 ? "a.com" : "b.com", i % 2 ? "b.com" : "a.com"));
    for (int i = 0; i < 4; ++i) events.push_back(ev("tok1234567890", "c.com", "d.com"));
    const auto m = pair_metrics("Left-Left", events, 1, psl());
    CHECK(m.tp_tp_domain_pairs == 2);
    CHECK(m.avg_syncs_per_tp_tp_pair == 4.5);
  }
  SUBCASE("296 syncs over 50 IDs") {
    std::vector<SyncEvent> events;
    for (int i = 0; i < 296; ++i)
      events.push_back(ev("token-" + std::to_string(1000000 + i % 50), "news-site.com", "t" + std::to_string(i % 7) + ".com"));
    const auto m = pair_metrics("Left-Centre", events, 42, psl());
    CHECK(m.unique_ids == 50);
    CHECK(m.avg_syncs_per_unique_id == doctest::Approx(5.92));
    CHECK(m.fp_tp_syncs == 296);
    CHECK(m.fp_tp_domain_pairs == 7);
    CHECK(m.website_pair_count == 42);
  }
  SUBCASE("no events") {
    const auto m = pair_metrics("Left-Left", {}, 3, psl());
    CHECK(m.zero_unique_ids);
    CHECK(m.avg_syncs_per_unique_id == 0.0);
  }
}

TEST_CASE("summary fractions and maxima") {
  std::vector<SiteLabel> labels;
  std::vector<CrawlTrace> traces;
  std::vector<SyncEvent> events;
  for (int i = 0; i < 4; ++i) {
    labels.push_back(tltest::label("site" + std::to_string(i) + ".com", Leaning::kLeft));
    TraceBuilder b(labels.back());
    b.request(b.page());
    for (int k = 0; k < 4; ++k) b.request("https://x.tracker" + std::to_string(k) + ".com/a", b.page());
    traces.push_back(b.build());
  }
  // site0 syncs to tracker0 with 87 distinct IDs; one ID fans out to 24 receivers.
  for (int i = 0; i < 87; ++i) events.push_back(ev("id-" + std::to_string(100000000 + i), "site0.com", "tracker0.com", "site0.com"));
  for (int r = 0; r < 24; ++r) events.push_back(ev("id-fanout-000001", "tracker1.com", "recv" + std::to_string(r) + ".com", "site1.com"));
  const auto s = csync_summary(events, traces, LabelSet(labels), psl());
  CHECK(s.fp_domains == 4);
  CHECK(s.fp_syncing == 1);
  CHECK(s.fp_fraction_syncing == 0.25);
  CHECK(s.max_ids_per_domain == std::pair<std::string, std::size_t>{"tracker0.com", 87});
  CHECK(s.max_domains_per_id == std::pair<std::string, std::size_t>{"id-fanout-000001", 24});
  CHECK(s.shortest_token == 12);
  CHECK(s.tp_syncing == 26);
  REQUIRE_FALSE(s.top_tps.empty());
  CHECK(s.top_tps[0].domain == "tracker0.com");
  CHECK(s.top_tps[0].total_syncs == 87);
  CHECK(s.top_tps[0].site_fraction.at(Leaning::kLeft) == 0.25);
  CHECK(s.top_tps.size() == 10);
}

TEST_CASE("per-pair analysis equals isolated re-analysis") {
  const auto synth = generate(default_spec(5));
  const LabelSet labels(default_spec(5).sites);
  const auto analysis = analyze_csync(synth.traces, labels, psl(), {}, 1);
  REQUIRE(analysis.table.size() == 6);
  for (std::size_t row = 0; row < 6; ++row) {
    const auto& gp = table_group_pairs()[row];
    const auto pairs = enumerate_pairs(labels, gp.first, gp.second);
    std::size_t syncs = 0;
    std::set<std::string> tokens;
    std::vector<double> per_pair;
    for (const auto& [a, b] : pairs) {
      std::vector<CrawlTrace> two;
      for (const auto& t : synth.traces)
        if ((t.site.site_id == a || t.site.site_id == b) && t.crawl_mode == CrawlMode::kStateful) two.push_back(t);
      const auto ids = extract_ids(two, psl(), {});
      const auto events = detect_syncs(two, ids, psl());
      syncs += events.size();
      std::set<std::string> pair_tokens;
      for (const auto& e : events) pair_tokens.insert(e.token);
      tokens.insert(pair_tokens.begin(), pair_tokens.end());
      per_pair.push_back(pair_tokens.empty() ? 0.0 : static_cast<double>(events.size()) / pair_tokens.size());
    }
    const auto& m = analysis.table[row];
    CAPTURE(m.group_pair);
    CHECK(m.website_pair_count == pairs.size());
    CHECK(m.sync_count == syncs);
    CHECK(m.unique_ids == tokens.size());
    CHECK(analysis.per_pair_avg.at(m.group_pair) == per_pair);
  }

  const auto parallel = analyze_csync(synth.traces, labels, psl(), {}, 4);
  CHECK(parallel.events == analysis.events);
  for (std::size_t row = 0; row < 6; ++row) {
    CHECK(parallel.table[row].sync_count == analysis.table[row].sync_count);
    CHECK(parallel.table[row].tp_tp_domain_pairs == analysis.table[row].tp_tp_domain_pairs);
  }

  auto shuffled = synth.traces;
  std::mt19937 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& t : shuffled) t.visit_order = static_cast<int>(rng() % 100);
  const auto reordered = analyze_csync(shuffled, labels, psl(), {}, 1);
  CHECK(reordered.events == analysis.events);
  for (std::size_t row = 0; row < 6; ++row) {
    CHECK(reordered.table[row].avg_syncs_per_unique_id == analysis.table[row].avg_syncs_per_unique_id);
    CHECK(reordered.table[row].avg_syncs_per_tp_tp_pair == analysis.table[row].avg_syncs_per_tp_tp_pair);
    CHECK(reordered.table[row].avg_syncs_per_fp_tp_pair == analysis.table[row].avg_syncs_per_fp_tp_pair);
  }
}

TEST_CASE("sync event JSON") {
  auto e = ev("tok1234567890", "a.com", "b.com");
  e.channel = SyncChannel::kRedirectLocation;
  const auto j = to_json(e);
  CHECK(j.at("channel") == "redirect_location");
  CHECK(j.at("receiver") == "b.com");
}
