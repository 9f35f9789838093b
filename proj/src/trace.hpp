#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace tracklens {

using Json = nlohmann::json;

enum class Leaning { kLeft, kCentre, kRight };
enum class Platform { kDesktop, kMobile };
enum class EventKind { kRequest, kResponse, kRedirect };
enum class CrawlMode { kStateless, kStateful };
enum class ApiOperation { kGet, kSet, kCall };

std::string_view to_string(Leaning v);
std::string_view to_string(Platform v);
std::string_view to_string(EventKind v);
std::string_view to_string(CrawlMode v);
std::string_view to_string(ApiOperation v);

// Parsers accept the lowercase wire spelling, case-insensitively.
std::optional<Leaning> parse_leaning(std::string_view s);
std::optional<Platform> parse_platform(std::string_view s);
std::optional<EventKind> parse_event_kind(std::string_view s);
std::optional<CrawlMode> parse_crawl_mode(std::string_view s);
std::optional<ApiOperation> parse_api_operation(std::string_view s);

// Display name used in tables ("Left", "Centre", "Right").
std::string_view leaning_title(Leaning v);
inline constexpr Leaning kAllLeanings[] = {Leaning::kLeft, Leaning::kCentre, Leaning::kRight};

// Every record keeps fields it does not recognize in `extra` so richer
// instrumentation survives a read/write cycle.

struct SiteLabel {
  std::string site_id;
  Leaning leaning = Leaning::kLeft;
  Platform platform = Platform::kDesktop;
  std::string display_name;
  std::optional<std::int64_t> followers;
  Json extra = Json::object();

  bool operator==(const SiteLabel&) const = default;
};

struct HttpEvent {
  std::string event_id;
  std::string visit_id;
  EventKind kind = EventKind::kRequest;
  std::string url;
  std::string method = "GET";
  std::optional<std::string> referrer;
  std::vector<std::pair<std::string, std::string>> headers;
  std::optional<int> status;
  std::optional<std::string> location;
  std::int64_t timestamp = 0;
  std::string top_level_site;
  // Response payload, base64. Absent for header-only captures.
  std::optional<std::string> body_base64;
  Json extra = Json::object();

  bool operator==(const HttpEvent&) const = default;
};

struct CookieRecord {
  std::string visit_id;
  std::string setter_domain;
  std::string name;
  std::string value;
  std::int64_t set_time = 0;
  std::optional<std::int64_t> expiry;  // absent: session cookie
  bool is_first_party_context = false;
  std::string crawl_id;
  Json extra = Json::object();

  bool operator==(const CookieRecord&) const = default;
};

struct JsApiCall {
  std::string visit_id;
  std::string script_url;
  std::string symbol;  // "Interface.member"
  ApiOperation operation = ApiOperation::kCall;
  std::vector<std::string> arguments;
  std::int64_t timestamp = 0;
  Json extra = Json::object();

  bool operator==(const JsApiCall&) const = default;
};

struct CrawlTrace {
  std::string visit_id;
  SiteLabel site;
  std::string crawl_id;
  CrawlMode crawl_mode = CrawlMode::kStateless;
  int visit_order = 0;
  std::vector<HttpEvent> events;
  std::vector<CookieRecord> cookies;
  std::vector<JsApiCall> js_calls;
  Json extra = Json::object();

  bool operator==(const CrawlTrace&) const = default;
};

// First header value matching `name` case-insensitively.
std::optional<std::string_view> find_header(const HttpEvent& event, std::string_view name);

// Referrer field, falling back to a Referer header.
std::optional<std::string_view> effective_referrer(const HttpEvent& event);

// Expiry before set time. Such cookies are kept but never become user IDs.
bool is_malformed(const CookieRecord& cookie);

// Stable identifier for the i-th JS call of a visit, used as finding evidence.
std::string js_call_id(std::string_view visit_id, std::size_t index);

Json to_json(const SiteLabel& v);
Json to_json(const HttpEvent& v);
Json to_json(const CookieRecord& v);
Json to_json(const JsApiCall& v);
Json to_json(const CrawlTrace& v);

SiteLabel site_label_from_json(const Json& j);
HttpEvent http_event_from_json(const Json& j);
CookieRecord cookie_record_from_json(const Json& j);
JsApiCall js_api_call_from_json(const Json& j);
CrawlTrace crawl_trace_from_json(const Json& j);

struct Violation {
  std::string record;  // event_id, "cookie[3]", "js_call[0]", or "trace"
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_trace(const CrawlTrace& trace);

// Sequential JSONL reader. Blank lines are skipped; a malformed line throws
// a parse error naming its 1-based line number.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in) : in_(in) {}
  std::optional<CrawlTrace> next();
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<CrawlTrace> parse_traces(std::string_view jsonl);
std::vector<CrawlTrace> read_traces(const std::string& path);
std::string serialize_traces(std::span<const CrawlTrace> traces);
void write_traces(std::span<const CrawlTrace> traces, const std::string& path);

// Labeled site roster keyed by (site_id, platform).
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<SiteLabel> labels);

  const std::vector<SiteLabel>& all() const { return labels_; }
  const SiteLabel* find(std::string_view site_id, Platform platform) const;
  const SiteLabel* find_any(std::string_view site_id) const;
  // Distinct site ids of a leaning, sorted; optionally restricted to one platform.
  std::vector<std::string> sites(Leaning leaning,
                                 std::optional<Platform> platform = std::nullopt) const;
  std::optional<Leaning> leaning_of(std::string_view site_id) const;
  bool empty() const { return labels_.empty(); }

 private:
  std::vector<SiteLabel> labels_;
  std::map<std::pair<std::string, Platform>, std::size_t> index_;
};

}  // namespace tracklens
