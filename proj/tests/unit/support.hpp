#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "domain.hpp"
#include "error.hpp"
#include "strings.hpp"
#include "trace.hpp"

namespace tltest {

using namespace tracklens;

inline constexpr std::int64_t kDay = 86'400'000;
inline constexpr std::int64_t kT0 = 1'593'561'600'000;  // 2020-07-01T00:00:00Z

inline std::string data_path(const std::string& rel) { return std::string(TRACKLENS_DATA_DIR) + "/" + rel; }
inline std::string fixture_path(const std::string& rel) { return std::string(TRACKLENS_FIXTURE_DIR) + "/" + rel; }

inline const SuffixSet& psl() {
  static const SuffixSet s = SuffixSet::load(data_path("public_suffix_list.dat"));
  return s;
}

inline SiteLabel label(std::string site, Leaning leaning, Platform platform = Platform::kDesktop) {
  SiteLabel l;
  l.site_id = std::move(site);
  l.leaning = leaning;
  l.platform = platform;
  l.display_name = l.site_id;
  return l;
}

// Builds one visit event by event. Timestamps advance by 10 ms per record.
class TraceBuilder {
 public:
  TraceBuilder(SiteLabel site, std::string crawl_id = "stateful-1", bool stateful = true) {
    t_.site = std::move(site);
    t_.crawl_id = std::move(crawl_id);
    t_.crawl_mode = stateful ? CrawlMode::kStateful : CrawlMode::kStateless;
    t_.visit_id = t_.crawl_id + "/" + t_.site.site_id + (t_.site.platform == Platform::kMobile ? "/mobile" : "");
  }

  TraceBuilder& visit_id(std::string id) {
    t_.visit_id = std::move(id);
    return *this;
  }

  std::string page() const { return "https://www." + t_.site.site_id + "/"; }

  HttpEvent& request(std::string url, std::optional<std::string> referrer = std::nullopt) {
    HttpEvent& e = add(EventKind::kRequest, std::move(url));
    e.referrer = std::move(referrer);
    return e;
  }

  HttpEvent& response(std::string url, int status = 200,
                      std::vector<std::pair<std::string, std::string>> headers = {},
                      std::optional<std::vector<std::uint8_t>> body = std::nullopt) {
    HttpEvent& e = add(EventKind::kResponse, std::move(url));
    e.status = status;
    e.headers = std::move(headers);
    if (body) e.body_base64 = base64_encode(*body);
    return e;
  }

  HttpEvent& redirect(std::string url, std::string location, int status = 302) {
    HttpEvent& e = add(EventKind::kRedirect, std::move(url));
    e.status = status;
    e.location = location;
    e.headers.emplace_back("Location", std::move(location));
    return e;
  }

  CookieRecord& cookie(std::string setter, std::string name, std::string value,
                       std::optional<std::int64_t> lifetime_ms = 365 * kDay,
                       std::optional<std::int64_t> set_time = std::nullopt) {
    CookieRecord c;
    c.visit_id = t_.visit_id;
    c.setter_domain = std::move(setter);
    c.name = std::move(name);
    c.value = std::move(value);
    c.set_time = set_time.value_or(clock_);
    if (lifetime_ms) c.expiry = c.set_time + *lifetime_ms;
    c.crawl_id = t_.crawl_id;
    c.is_first_party_context = true;
    t_.cookies.push_back(std::move(c));
    return t_.cookies.back();
  }

  JsApiCall& js(std::string script, std::string symbol, ApiOperation op = ApiOperation::kCall,
                std::vector<std::string> args = {}) {
    JsApiCall c;
    c.visit_id = t_.visit_id;
    c.script_url = std::move(script);
    c.symbol = std::move(symbol);
    c.operation = op;
    c.arguments = std::move(args);
    c.timestamp = tick();
    t_.js_calls.push_back(std::move(c));
    return t_.js_calls.back();
  }

  CrawlTrace& trace() { return t_; }
  CrawlTrace build() const { return t_; }

 private:
  std::int64_t tick() { return clock_ += 10; }

  HttpEvent& add(EventKind kind, std::string url) {
    HttpEvent e;
    e.event_id = t_.visit_id + ":e" + std::to_string(t_.events.size());
    e.visit_id = t_.visit_id;
    e.kind = kind;
    e.url = std::move(url);
    e.timestamp = tick();
    e.top_level_site = t_.site.site_id;
    t_.events.push_back(std::move(e));
    return t_.events.back();
  }

  CrawlTrace t_;
  std::int64_t clock_ = kT0;
};

inline const std::vector<std::uint8_t>& gif_1x1() {
  static const std::vector<std::uint8_t> bytes = [] {
    const std::string hex =
        "47494638396101000100800000000000ffffff21f90401000000002c00000000010001000002024401003b";
    std::vector<std::uint8_t> v;
    for (std::size_t i = 0; i < hex.size(); i += 2)
      v.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    return v;
  }();
  return bytes;
}

template <typename Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  throw std::logic_error("expected tracklens::Error");
}

}  // namespace tltest
