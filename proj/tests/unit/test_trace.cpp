#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "synth.hpp"
#include "trace.hpp"

using namespace tracklens;
using tltest::TraceBuilder;

namespace {

std::vector<std::string> rules_of(const CrawlTrace& t) {
  std::vector<std::string> out;
  for (const auto& v : validate_trace(t)) out.push_back(v.rule);
  return out;
}

CrawlTrace small_trace() {
  TraceBuilder b(tltest::label("ndtv.com", Leaning::kLeft));
  b.request("https://www.ndtv.com/", std::nullopt);
  b.response("https://www.ndtv.com/", 200, {{"Content-Type", "text/html"}});
  b.cookie("doubleclick.net", "IDE", "AHWqTUk-8c41d2e9b7a3");
  b.js("https://www.ndtv.com/app.js", "HTMLCanvasElement.toDataURL");
  return b.build();
}

}  // namespace

TEST_CASE("enum spellings round trip") {
  for (Leaning l : kAllLeanings) CHECK(parse_leaning(to_string(l)) == l);
  CHECK(parse_leaning("LEFT") == Leaning::kLeft);
  CHECK_FALSE(parse_leaning("unknown"));
  CHECK(parse_platform("mobile") == Platform::kMobile);
  CHECK(parse_event_kind("redirect") == EventKind::kRedirect);
  CHECK(parse_crawl_mode("stateful") == CrawlMode::kStateful);
  CHECK(parse_api_operation("set") == ApiOperation::kSet);
  CHECK(leaning_title(Leaning::kCentre) == "Centre");
}

TEST_CASE("synth traces survive a JSONL round trip") {
  PlantSpec spec = default_spec(3);
  const auto out = generate(spec);
  REQUIRE_FALSE(out.traces.empty());
  const std::string text = serialize_traces(out.traces);
  const auto back = parse_traces(text);
  CHECK(back == out.traces);
  CHECK(serialize_traces(back) == text);
}

TEST_CASE("unknown fields are preserved") {
  Json j = to_json(small_trace());
  j["crawler"] = {{"name", "openwpm"}, {"version", "0.12"}};
  j["events"][0]["frame_id"] = 7;
  j["cookies"][0]["http_only"] = true;
  const auto t = crawl_trace_from_json(j);
  CHECK(t.extra.at("crawler").at("name") == "openwpm");
  CHECK(t.events[0].extra.at("frame_id") == 7);
  CHECK(t.cookies[0].extra.at("http_only") == true);
  CHECK(to_json(t) == j);
}

TEST_CASE("reader errors name the line") {
  CHECK(parse_traces("").empty());
  CHECK(parse_traces("\n   \n").empty());
  const std::string good = serialize_traces(std::vector<CrawlTrace>{small_trace()});
  try {
    parse_traces(good.substr(0, good.size() / 2));
    FAIL("truncated line accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).rfind("line 1:", 0) == 0);
  }
  try {
    parse_traces(good + "\n{\"visit_id\": 3}\n");
    FAIL("bad record accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).rfind("line 3:", 0) == 0);
  }
  CHECK(tltest::error_code_of([] { read_traces("/nonexistent/traces.jsonl"); }) == ErrorCode::kNotFound);
}

TEST_CASE("a clean trace has no violations") {
  CHECK(validate_trace(small_trace()).empty());
}

TEST_CASE("validation rules") {
  SUBCASE("site id") {
    auto t = small_trace();
    t.site.site_id = "WWW.NDTV.com/";
    CHECK(rules_of(t) == std::vector<std::string>{"site-id-format"});
  }
  SUBCASE("event ids") {
    auto t = small_trace();
    t.events[1].event_id = t.events[0].event_id;
    t.events.push_back(t.events[0]);
    t.events.back().event_id.clear();
    t.events.back().timestamp = t.events[1].timestamp;
    CHECK(rules_of(t) == std::vector<std::string>{"event-id-duplicate", "event-id-empty"});
  }
  SUBCASE("visit mismatch and urls") {
    auto t = small_trace();
    t.events[0].visit_id = "other";
    t.events[1].url = "/relative";
    CHECK(rules_of(t) == std::vector<std::string>{"visit-id-mismatch", "url-not-absolute-http"});
  }
  SUBCASE("redirect and request shape") {
    auto t = small_trace();
    t.events[0].status = 200;
    t.events[1].kind = EventKind::kRedirect;
    CHECK(rules_of(t) == std::vector<std::string>{"request-has-status", "redirect-missing-location"});
  }
  SUBCASE("ordering") {
    auto t = small_trace();
    t.events[1].timestamp = t.events[0].timestamp - 1;
    CHECK(rules_of(t) == std::vector<std::string>{"events-not-sorted"});
  }
  SUBCASE("malformed cookie") {
    auto t = small_trace();
    t.cookies[0].expiry = t.cookies[0].set_time - 1;
    CHECK(is_malformed(t.cookies[0]));
    CHECK(rules_of(t) == std::vector<std::string>{"malformed-cookie"});
  }
  SUBCASE("symbol") {
    auto t = small_trace();
    t.js_calls[0].symbol = "toDataURL";
    CHECK(rules_of(t) == std::vector<std::string>{"symbol-format"});
  }
  SUBCASE("empty visit id") {
    auto t = small_trace();
    t.visit_id.clear();
    const auto rules = rules_of(t);
    CHECK(rules.front() == "visit-id-empty");
  }
}

TEST_CASE("referrer falls back to the header") {
  HttpEvent e;
  e.headers = {{"referer", "https://a.example/"}};
  CHECK(effective_referrer(e) == "https://a.example/");
  e.referrer = "https://b.example/";
  CHECK(effective_referrer(e) == "https://b.example/");
  CHECK(find_header(e, "REFERER") == "https://a.example/");
  CHECK_FALSE(find_header(e, "Location"));
}

TEST_CASE("label set lookups") {
  LabelSet labels({tltest::label("a.com", Leaning::kLeft), tltest::label("b.com", Leaning::kRight),
                   tltest::label("a.com", Leaning::kLeft, Platform::kMobile),
                   tltest::label("c.com", Leaning::kLeft, Platform::kMobile)});
  CHECK(labels.find("a.com", Platform::kMobile) != nullptr);
  CHECK(labels.find("b.com", Platform::kMobile) == nullptr);
  CHECK(labels.sites(Leaning::kLeft) == std::vector<std::string>{"a.com", "c.com"});
  CHECK(labels.sites(Leaning::kLeft, Platform::kDesktop) == std::vector<std::string>{"a.com"});
  CHECK(labels.leaning_of("b.com") == Leaning::kRight);
  CHECK_FALSE(labels.leaning_of("z.com"));
}
