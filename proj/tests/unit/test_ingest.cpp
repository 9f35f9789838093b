#include <doctest.h>

#include <filesystem>

#include "ingest.hpp"
#include "support.hpp"

using namespace tracklens;
using tltest::psl;

namespace {

Json har_entry(const std::string& url, int status, Json resp_headers = Json::array(), std::string redirect = "") {
  return {{"startedDateTime", "2020-07-01T10:00:00.000Z"},
          {"time", 20},
          {"request", {{"method", "GET"}, {"url", url}, {"headers", Json::array()}}},
          {"response",
           {{"status", status},
            {"headers", resp_headers},
            {"content", {{"size", 0}, {"mimeType", "text/html"}}},
            {"redirectURL", redirect}}}};
}

std::string har(std::vector<Json> entries) {
  Json doc = {{"log", {{"version", "1.2"}, {"entries", entries}}}};
  return doc.dump();
}

const SiteLabel kSite = tltest::label("ndtv.com", Leaning::kLeft);

VisitContext ctx() {
  VisitContext c;
  c.visit_id = "v1";
  c.crawl_id = "stateful-1";
  c.crawl_mode = CrawlMode::kStateful;
  return c;
}

}  // namespace

TEST_CASE("one 200 entry gives a request and a response") {
  const auto r = ingest_har(har({har_entry("https://www.ndtv.com/", 200)}), kSite, psl(), ctx());
  REQUIRE(r.trace.events.size() == 2);
  CHECK(r.trace.events[0].kind == EventKind::kRequest);
  CHECK(r.trace.events[1].kind == EventKind::kResponse);
  CHECK(r.trace.events[1].status == 200);
  CHECK(r.trace.cookies.empty());
  CHECK(validate_trace(r.trace).empty());
}

TEST_CASE("Max-Age sets the expiry") {
  const Json headers = Json::array({{{"name", "Set-Cookie"}, {"value", "uid=abc; Max-Age=7776000"}}});
  const auto r = ingest_har(har({har_entry("https://cdn.tracker.com/t.js", 200, headers)}), kSite, psl(), ctx());
  REQUIRE(r.trace.cookies.size() == 1);
  const auto& c = r.trace.cookies[0];
  CHECK(c.name == "uid");
  CHECK(c.value == "abc");
  CHECK(c.setter_domain == "cdn.tracker.com");
  CHECK_FALSE(c.is_first_party_context);
  REQUIRE(c.expiry);
  CHECK(*c.expiry - c.set_time == 90 * tltest::kDay);
}

TEST_CASE("cookie Domain attribute names the setter") {
  const Json headers = Json::array({{{"name", "set-cookie"}, {"value", "id=1; Domain=.NDTV.com; Path=/"}}});
  const auto r = ingest_har(har({har_entry("https://cdn.ndtv.com/x", 200, headers)}), kSite, psl(), ctx());
  REQUIRE(r.trace.cookies.size() == 1);
  CHECK(r.trace.cookies[0].setter_domain == "ndtv.com");
  CHECK(r.trace.cookies[0].is_first_party_context);
  CHECK_FALSE(r.trace.cookies[0].expiry);
}

TEST_CASE("a 301 with Location adds a redirect event") {
  const Json headers = Json::array({{{"name", "Location"}, {"value", "https://www.ndtv.com/home"}}});
  const auto r = ingest_har(har({har_entry("http://ndtv.com/", 301, headers)}), kSite, psl(), ctx());
  REQUIRE(r.trace.events.size() == 3);
  CHECK(r.trace.events[0].kind == EventKind::kRequest);
  CHECK(r.trace.events[1].kind == EventKind::kResponse);
  CHECK(r.trace.events[2].kind == EventKind::kRedirect);
  CHECK(r.trace.events[2].location == "https://www.ndtv.com/home");
}

TEST_CASE("entries without URL are skipped with a warning") {
  Json bad = har_entry("", 200);
  const auto r = ingest_har(har({bad, har_entry("https://www.ndtv.com/", 200)}), kSite, psl(), ctx());
  CHECK(r.trace.events.size() == 2);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("non-HAR input is a format error") {
  CHECK(tltest::error_code_of([] { ingest_har("{\"entries\": []}", kSite, psl(), ctx()); }) == ErrorCode::kFormat);
  CHECK(tltest::error_code_of([] { ingest_har("not json", kSite, psl(), ctx()); }) == ErrorCode::kFormat);
}

TEST_CASE("event count invariant on the HAR fixtures") {
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(tltest::fixture_path("har"))) {
    ++files;
    const std::string text = read_file(entry.path().string());
    // Independent count straight from the HAR JSON.
    const Json doc = Json::parse(text);
    std::size_t expected = 0;
    for (const auto& e : doc["log"]["entries"]) {
      expected += 2;
      const int status = e["response"]["status"].get<int>();
      bool has_location = !e["response"].value("redirectURL", "").empty();
      for (const auto& h : e["response"]["headers"])
        if (to_lower_ascii(h["name"].get<std::string>()) == "location") has_location = true;
      if (status >= 300 && status < 400 && has_location) ++expected;
    }
    const std::string site = entry.path().filename().string().substr(0, entry.path().filename().string().find(".stateful"));
    const auto r = ingest_har(text, tltest::label(site, Leaning::kLeft), psl(), ctx());
    CAPTURE(entry.path().string());
    CHECK(r.trace.events.size() == expected);
    CHECK(validate_trace(r.trace).empty());
    const auto again = ingest_har(text, tltest::label(site, Leaning::kLeft), psl(), ctx());
    CHECK(again.trace == r.trace);
  }
  CHECK(files == 12);
}

TEST_CASE("cookies.txt lines") {
  const std::string text =
      "# Netscape HTTP Cookie File\n"
      ".example.com\tTRUE\t/\tFALSE\t1999999999\tuid\tXYZ\n"
      "example.com\tFALSE\t/\tFALSE\t0\tsess\tq\n"
      "#HttpOnly_.tracker.net\tTRUE\t/\tTRUE\t1999999999\thid\tabc\n"
      "short\tline\n";
  VisitContext c = ctx();
  c.capture_time_ms = tltest::kT0;
  const auto r = ingest_cookies_txt(text, tltest::label("example.com", Leaning::kLeft, Platform::kMobile), psl(), c);
  REQUIRE(r.trace.cookies.size() == 3);
  CHECK(r.trace.events.empty());
  CHECK(r.trace.js_calls.empty());
  CHECK(r.trace.cookies[0].setter_domain == "example.com");
  CHECK(r.trace.cookies[0].name == "uid");
  CHECK(r.trace.cookies[0].value == "XYZ");
  CHECK(r.trace.cookies[0].expiry == 1999999999000LL);
  CHECK(r.trace.cookies[0].set_time == tltest::kT0);
  CHECK_FALSE(r.trace.cookies[1].expiry);
  CHECK(r.trace.cookies[2].setter_domain == "tracker.net");
  CHECK_FALSE(r.trace.cookies[2].is_first_party_context);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("Set-Cookie parsing") {
  const auto a = parse_set_cookie("a=1; Expires=Wed, 01 Jul 2020 00:00:00 GMT", 0);
  REQUIRE(a);
  CHECK(a->expiry == tltest::kT0);
  const auto b = parse_set_cookie("b=2; Expires=Wed, 01 Jul 2020 00:00:00 GMT; Max-Age=60", 1000);
  REQUIRE(b);
  CHECK(b->expiry == 61000);
  const auto c = parse_set_cookie("c=3; Max-Age=0", 5000);
  REQUIRE(c);
  CHECK(c->expiry == 5000);
  CHECK_FALSE(parse_set_cookie("", 0));
}

TEST_CASE("Disconnect lookup") {
  const auto map = DisconnectMap::load(tltest::fixture_path("disconnect/services.json"));
  CHECK(map.lookup("stats.g.doubleclick.net") == TrackerCategory::kAdvertising);
  CHECK(map.lookup("doubleclick.net") == TrackerCategory::kAdvertising);
  CHECK(map.lookup("www.google-analytics.com") == TrackerCategory::kAnalytics);
  CHECK(map.lookup("coinhash.io") == TrackerCategory::kCryptomining);
  CHECK(map.lookup("trackdot.io") == TrackerCategory::kUnknown);
  CHECK(map.lookup("notdoubleclick.net") == TrackerCategory::kUnknown);
  CHECK(parse_tracker_category("FingerprintingInvasive") == TrackerCategory::kFingerprinting);
  CHECK(tltest::error_code_of([] { DisconnectMap::parse("[]"); }) == ErrorCode::kFormat);
}

TEST_CASE("Disconnect longest suffix wins") {
  const auto map = DisconnectMap::parse(
      R"({"categories": {"Advertising": [{"Ex": {"https://ex.com": ["ex.com"]}}],
                         "Analytics": [{"Ex": {"https://ex.com": ["stats.ex.com"]}}]}})");
  CHECK(map.lookup("a.stats.ex.com") == TrackerCategory::kAnalytics);
  CHECK(map.lookup("ads.ex.com") == TrackerCategory::kAdvertising);
}

TEST_CASE("labels CSV") {
  const auto labels = parse_labels_csv("site_id,leaning,platform,display_name,followers\nndtv.com,left,desktop,NDTV,1000000\n");
  REQUIRE(labels.size() == 1);
  CHECK(labels[0].site_id == "ndtv.com");
  CHECK(labels[0].leaning == Leaning::kLeft);
  CHECK(labels[0].platform == Platform::kDesktop);
  CHECK(labels[0].display_name == "NDTV");
  CHECK(labels[0].followers == 1000000);

  CHECK(tltest::error_code_of([] {
          parse_labels_csv("site_id,leaning,platform,display_name,followers\nx.com,unknown,desktop,X,\n");
        }) == ErrorCode::kInvalidArgument);
  CHECK(tltest::error_code_of([] {
          LabelSet(parse_labels_csv(
              "site_id,leaning,platform,display_name,followers\nx.com,left,desktop,X,\nx.com,left,desktop,X,\n"));
        }) == ErrorCode::kInvalidArgument);
  CHECK(tltest::error_code_of([] { load_labels("/nonexistent/labels.csv"); }) == ErrorCode::kNotFound);
  const auto fixture = load_labels(tltest::fixture_path("corpus/labels.csv"));
  CHECK(fixture.all().size() == 7);
  CHECK_FALSE(fixture.all()[3].followers);
}

TEST_CASE("baseline CSV") {
  const auto b = BaselineTable::load(tltest::fixture_path("baseline/baseline.csv"));
  CHECK(b.lookup("doubleclick.net") == doctest::Approx(0.78));
  CHECK_FALSE(b.lookup("trackdot.io"));
  CHECK(tltest::error_code_of([] { BaselineTable::parse("domain,fraction\na.com,1.5\n"); }) == ErrorCode::kFormat);
}
