#include "trace.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "error.hpp"
#include "strings.hpp"
#include "url.hpp"

namespace tracklens {

namespace {

template <typename E, std::size_t N>
std::optional<E> parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table)
    if (iequals(s, name)) return value;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table)
    if (value == v) return name;
  return "?";
}

constexpr std::pair<Leaning, std::string_view> kLeaningNames[] = {
    {Leaning::kLeft, "left"}, {Leaning::kCentre, "centre"}, {Leaning::kRight, "right"}};
constexpr std::pair<Platform, std::string_view> kPlatformNames[] = {
    {Platform::kDesktop, "desktop"}, {Platform::kMobile, "mobile"}};
constexpr std::pair<EventKind, std::string_view> kEventKindNames[] = {
    {EventKind::kRequest, "request"},
    {EventKind::kResponse, "response"},
    {EventKind::kRedirect, "redirect"}};
constexpr std::pair<CrawlMode, std::string_view> kCrawlModeNames[] = {
    {CrawlMode::kStateless, "stateless"}, {CrawlMode::kStateful, "stateful"}};
constexpr std::pair<ApiOperation, std::string_view> kApiOperationNames[] = {
    {ApiOperation::kGet, "get"}, {ApiOperation::kSet, "set"}, {ApiOperation::kCall, "call"}};

[[noreturn]] void schema_error(std::string_view what) {
  throw Error(ErrorCode::kParse, std::string(what));
}

const Json& require(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing field '") + key + "'");
  return *it;
}

std::string get_string(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_string()) schema_error(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> get_opt_string(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema_error(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::int64_t get_int(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_number_integer()) schema_error(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::optional<std::int64_t> get_opt_int(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer())
    schema_error(std::string("field '") + key + "' must be an integer");
  return it->get<std::int64_t>();
}

bool get_bool(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_boolean()) schema_error(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

template <typename E, std::size_t N>
E get_enum(const Json& j, const char* key, const std::pair<E, std::string_view> (&table)[N]) {
  const std::string s = get_string(j, key);
  const auto v = parse_enum(s, table);
  if (!v) schema_error(std::string("field '") + key + "' has unknown value '" + s + "'");
  return *v;
}

const Json& require_array(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_array()) schema_error(std::string("field '") + key + "' must be an array");
  return v;
}

Json collect_extra(const Json& j, std::initializer_list<std::string_view> known) {
  Json extra = Json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      extra[it.key()] = it.value();
  }
  return extra;
}

Json with_extra(const Json& extra) {
  return extra.is_object() ? extra : Json::object();
}

}  // namespace

std::string_view to_string(Leaning v) { return enum_name(v, kLeaningNames); }
std::string_view to_string(Platform v) { return enum_name(v, kPlatformNames); }
std::string_view to_string(EventKind v) { return enum_name(v, kEventKindNames); }
std::string_view to_string(CrawlMode v) { return enum_name(v, kCrawlModeNames); }
std::string_view to_string(ApiOperation v) { return enum_name(v, kApiOperationNames); }

std::optional<Leaning> parse_leaning(std::string_view s) { return parse_enum(trim(s), kLeaningNames); }
std::optional<Platform> parse_platform(std::string_view s) { return parse_enum(trim(s), kPlatformNames); }
std::optional<EventKind> parse_event_kind(std::string_view s) { return parse_enum(s, kEventKindNames); }
std::optional<CrawlMode> parse_crawl_mode(std::string_view s) { return parse_enum(s, kCrawlModeNames); }
std::optional<ApiOperation> parse_api_operation(std::string_view s) {
  return parse_enum(s, kApiOperationNames);
}

std::string_view leaning_title(Leaning v) {
  switch (v) {
    case Leaning::kLeft: return "Left";
    case Leaning::kCentre: return "Centre";
    case Leaning::kRight: return "Right";
  }
  return "?";
}

std::optional<std::string_view> find_header(const HttpEvent& event, std::string_view name) {
  for (const auto& [key, value] : event.headers)
    if (iequals(key, name)) return std::string_view(value);
  return std::nullopt;
}

std::optional<std::string_view> effective_referrer(const HttpEvent& event) {
  if (event.referrer && !event.referrer->empty()) return std::string_view(*event.referrer);
  if (auto h = find_header(event, "Referer"); h && !h->empty()) return h;
  return std::nullopt;
}

bool is_malformed(const CookieRecord& cookie) {
  return cookie.expiry && *cookie.expiry < cookie.set_time;
}

std::string js_call_id(std::string_view visit_id, std::size_t index) {
  return std::string(visit_id) + "#" + std::to_string(index);
}

// ---- JSON encoding ----------------------------------------------------------

Json to_json(const SiteLabel& v) {
  Json j = with_extra(v.extra);
  j["site_id"] = v.site_id;
  j["leaning"] = to_string(v.leaning);
  j["platform"] = to_string(v.platform);
  j["display_name"] = v.display_name;
  if (v.followers) j["followers"] = *v.followers;
  return j;
}

Json to_json(const HttpEvent& v) {
  Json j = with_extra(v.extra);
  j["event_id"] = v.event_id;
  j["visit_id"] = v.visit_id;
  j["kind"] = to_string(v.kind);
  j["url"] = v.url;
  j["method"] = v.method;
  if (v.referrer) j["referrer"] = *v.referrer;
  Json headers = Json::array();
  for (const auto& [name, value] : v.headers) headers.push_back({{"name", name}, {"value", value}});
  j["headers"] = std::move(headers);
  if (v.status) j["status"] = *v.status;
  if (v.location) j["location"] = *v.location;
  j["timestamp"] = v.timestamp;
  j["top_level_site"] = v.top_level_site;
  if (v.body_base64) j["body_base64"] = *v.body_base64;
  return j;
}

Json to_json(const CookieRecord& v) {
  Json j = with_extra(v.extra);
  j["visit_id"] = v.visit_id;
  j["setter_domain"] = v.setter_domain;
  j["name"] = v.name;
  j["value"] = v.value;
  j["set_time"] = v.set_time;
  if (v.expiry) j["expiry"] = *v.expiry;
  j["is_first_party_context"] = v.is_first_party_context;
  j["crawl_id"] = v.crawl_id;
  return j;
}

Json to_json(const JsApiCall& v) {
  Json j = with_extra(v.extra);
  j["visit_id"] = v.visit_id;
  j["script_url"] = v.script_url;
  j["symbol"] = v.symbol;
  j["operation"] = to_string(v.operation);
  j["arguments"] = v.arguments;
  j["timestamp"] = v.timestamp;
  return j;
}

Json to_json(const CrawlTrace& v) {
  Json j = with_extra(v.extra);
  j["visit_id"] = v.visit_id;
  j["site"] = to_json(v.site);
  j["crawl_id"] = v.crawl_id;
  j["crawl_mode"] = to_string(v.crawl_mode);
  j["visit_order"] = v.visit_order;
  Json events = Json::array();
  for (const auto& e : v.events) events.push_back(to_json(e));
  j["events"] = std::move(events);
  Json cookies = Json::array();
  for (const auto& c : v.cookies) cookies.push_back(to_json(c));
  j["cookies"] = std::move(cookies);
  Json calls = Json::array();
  for (const auto& c : v.js_calls) calls.push_back(to_json(c));
  j["js_calls"] = std::move(calls);
  return j;
}

// ---- JSON decoding ----------------------------------------------------------

SiteLabel site_label_from_json(const Json& j) {
  if (!j.is_object()) schema_error("site must be an object");
  SiteLabel v;
  v.site_id = get_string(j, "site_id");
  v.leaning = get_enum(j, "leaning", kLeaningNames);
  v.platform = get_enum(j, "platform", kPlatformNames);
  v.display_name = get_opt_string(j, "display_name").value_or("");
  v.followers = get_opt_int(j, "followers");
  v.extra = collect_extra(j, {"site_id", "leaning", "platform", "display_name", "followers"});
  return v;
}

HttpEvent http_event_from_json(const Json& j) {
  if (!j.is_object()) schema_error("event must be an object");
  HttpEvent v;
  v.event_id = get_string(j, "event_id");
  v.visit_id = get_string(j, "visit_id");
  v.kind = get_enum(j, "kind", kEventKindNames);
  v.url = get_string(j, "url");
  v.method = get_opt_string(j, "method").value_or("GET");
  v.referrer = get_opt_string(j, "referrer");
  if (const auto it = j.find("headers"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) schema_error("field 'headers' must be an array");
    for (const auto& h : *it) {
      if (h.is_object()) {
        v.headers.emplace_back(get_string(h, "name"), get_string(h, "value"));
      } else if (h.is_array() && h.size() == 2 && h[0].is_string() && h[1].is_string()) {
        v.headers.emplace_back(h[0].get<std::string>(), h[1].get<std::string>());
      } else {
        schema_error("header entries must be {name, value}");
      }
    }
  }
  if (const auto s = get_opt_int(j, "status")) v.status = static_cast<int>(*s);
  v.location = get_opt_string(j, "location");
  v.timestamp = get_int(j, "timestamp");
  v.top_level_site = get_string(j, "top_level_site");
  v.body_base64 = get_opt_string(j, "body_base64");
  v.extra = collect_extra(j, {"event_id", "visit_id", "kind", "url", "method", "referrer",
                              "headers", "status", "location", "timestamp", "top_level_site",
                              "body_base64"});
  return v;
}

CookieRecord cookie_record_from_json(const Json& j) {
  if (!j.is_object()) schema_error("cookie must be an object");
  CookieRecord v;
  v.visit_id = get_string(j, "visit_id");
  v.setter_domain = get_string(j, "setter_domain");
  v.name = get_string(j, "name");
  v.value = get_string(j, "value");
  v.set_time = get_int(j, "set_time");
  v.expiry = get_opt_int(j, "expiry");
  v.is_first_party_context = get_bool(j, "is_first_party_context");
  v.crawl_id = get_string(j, "crawl_id");
  v.extra = collect_extra(j, {"visit_id", "setter_domain", "name", "value", "set_time", "expiry",
                              "is_first_party_context", "crawl_id"});
  return v;
}

JsApiCall js_api_call_from_json(const Json& j) {
  if (!j.is_object()) schema_error("js call must be an object");
  JsApiCall v;
  v.visit_id = get_string(j, "visit_id");
  v.script_url = get_string(j, "script_url");
  v.symbol = get_string(j, "symbol");
  v.operation = get_enum(j, "operation", kApiOperationNames);
  if (const auto it = j.find("arguments"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) schema_error("field 'arguments' must be an array");
    for (const auto& a : *it) v.arguments.push_back(a.is_string() ? a.get<std::string>() : a.dump());
  }
  v.timestamp = get_int(j, "timestamp");
  v.extra = collect_extra(j, {"visit_id", "script_url", "symbol", "operation", "arguments",
                              "timestamp"});
  return v;
}

CrawlTrace crawl_trace_from_json(const Json& j) {
  if (!j.is_object()) schema_error("trace must be a JSON object");
  CrawlTrace v;
  v.visit_id = get_string(j, "visit_id");
  v.site = site_label_from_json(require(j, "site"));
  v.crawl_id = get_string(j, "crawl_id");
  v.crawl_mode = get_enum(j, "crawl_mode", kCrawlModeNames);
  v.visit_order = static_cast<int>(get_int(j, "visit_order"));
  for (const auto& e : require_array(j, "events")) v.events.push_back(http_event_from_json(e));
  for (const auto& c : require_array(j, "cookies")) v.cookies.push_back(cookie_record_from_json(c));
  for (const auto& c : require_array(j, "js_calls")) v.js_calls.push_back(js_api_call_from_json(c));
  v.extra = collect_extra(j, {"visit_id", "site", "crawl_id", "crawl_mode", "visit_order",
                              "events", "cookies", "js_calls"});
  return v;
}

// ---- validation -------------------------------------------------------------

namespace {

bool looks_like_registrable_site(std::string_view s) {
  if (s.empty() || s.front() == '.' || s.back() == '.') return false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (c >= 'A' && c <= 'Z') return false;
    if (c == '/' || c == ':' || c == ' ' || c == '?' || c == '#' || c == '@') return false;
    if (u < 0x21) return false;
  }
  return s.find("..") == std::string_view::npos;
}

}  // namespace

std::vector<Violation> validate_trace(const CrawlTrace& trace) {
  std::vector<Violation> out;
  auto add = [&out](std::string record, std::string rule, std::string detail) {
    out.push_back({std::move(record), std::move(rule), std::move(detail)});
  };

  if (!looks_like_registrable_site(trace.site.site_id))
    add("trace", "site-id-format", "site_id '" + trace.site.site_id + "' is not a bare lowercase domain");
  if (trace.visit_id.empty()) add("trace", "visit-id-empty", "visit_id is empty");

  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const HttpEvent& e = trace.events[i];
    const std::string rec = e.event_id.empty() ? "event[" + std::to_string(i) + "]" : e.event_id;
    if (e.event_id.empty()) add(rec, "event-id-empty", "event_id is empty");
    else if (!seen_ids.insert(e.event_id).second) add(rec, "event-id-duplicate", "event_id repeats");
    if (e.visit_id != trace.visit_id) add(rec, "visit-id-mismatch", "event visit_id '" + e.visit_id + "'");
    if (!parse_http_url(e.url)) add(rec, "url-not-absolute-http", "url '" + e.url + "'");
    if (e.kind == EventKind::kRedirect && !e.location) add(rec, "redirect-missing-location", "");
    if (e.kind == EventKind::kRequest && e.status) add(rec, "request-has-status", "");
    if (i > 0 && e.timestamp < trace.events[i - 1].timestamp)
      add(rec, "events-not-sorted", "timestamp decreases");
  }
  for (std::size_t i = 0; i < trace.cookies.size(); ++i) {
    const CookieRecord& c = trace.cookies[i];
    const std::string rec = "cookie[" + std::to_string(i) + "]";
    if (c.visit_id != trace.visit_id) add(rec, "visit-id-mismatch", "cookie visit_id '" + c.visit_id + "'");
    if (is_malformed(c)) add(rec, "malformed-cookie", "expiry precedes set_time; excluded from ID extraction");
  }
  for (std::size_t i = 0; i < trace.js_calls.size(); ++i) {
    const JsApiCall& c = trace.js_calls[i];
    const std::string rec = "js_call[" + std::to_string(i) + "]";
    if (c.visit_id != trace.visit_id) add(rec, "visit-id-mismatch", "js call visit_id '" + c.visit_id + "'");
    const auto dot = c.symbol.find('.');
    if (c.symbol.empty() || dot == std::string::npos || dot == 0 || dot + 1 == c.symbol.size() ||
        c.symbol.find('.', dot + 1) != std::string::npos)
      add(rec, "symbol-format", "symbol '" + c.symbol + "'");
  }
  return out;
}

// ---- JSONL I/O ---------------------------------------------------------------

std::optional<CrawlTrace> TraceReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (trim(text).empty()) continue;
    try {
      return crawl_trace_from_json(Json::parse(text));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_) + ": " + e.what());
    }
  }
  return std::nullopt;
}

std::vector<CrawlTrace> parse_traces(std::string_view jsonl) {
  std::istringstream in{std::string(jsonl)};
  TraceReader reader(in);
  std::vector<CrawlTrace> out;
  while (auto t = reader.next()) out.push_back(std::move(*t));
  return out;
}

std::vector<CrawlTrace> read_traces(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path);
  TraceReader reader(in);
  std::vector<CrawlTrace> out;
  while (auto t = reader.next()) out.push_back(std::move(*t));
  return out;
}

std::string serialize_traces(std::span<const CrawlTrace> traces) {
  std::string out;
  for (const auto& t : traces) {
    out += to_json(t).dump();
    out.push_back('\n');
  }
  return out;
}

void write_traces(std::span<const CrawlTrace> traces, const std::string& path) {
  write_file(path, serialize_traces(traces));
}

// ---- LabelSet ---------------------------------------------------------------

LabelSet::LabelSet(std::vector<SiteLabel> labels) : labels_(std::move(labels)) {
  std::map<std::string, Leaning> leaning_by_site;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const SiteLabel& l = labels_[i];
    if (!index_.emplace(std::make_pair(l.site_id, l.platform), i).second)
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate label for site_id '" + l.site_id + "' (" +
                      std::string(to_string(l.platform)) + ")");
    const auto [it, inserted] = leaning_by_site.emplace(l.site_id, l.leaning);
    if (!inserted && it->second != l.leaning)
      throw Error(ErrorCode::kInvalidArgument,
                  "site_id '" + l.site_id + "' labeled with two different leanings");
  }
}

const SiteLabel* LabelSet::find(std::string_view site_id, Platform platform) const {
  const auto it = index_.find(std::make_pair(std::string(site_id), platform));
  return it == index_.end() ? nullptr : &labels_[it->second];
}

const SiteLabel* LabelSet::find_any(std::string_view site_id) const {
  if (auto* l = find(site_id, Platform::kDesktop)) return l;
  return find(site_id, Platform::kMobile);
}

std::vector<std::string> LabelSet::sites(Leaning leaning, std::optional<Platform> platform) const {
  std::set<std::string> out;
  for (const auto& l : labels_)
    if (l.leaning == leaning && (!platform || l.platform == *platform)) out.insert(l.site_id);
  return {out.begin(), out.end()};
}

std::optional<Leaning> LabelSet::leaning_of(std::string_view site_id) const {
  if (auto* l = find_any(site_id)) return l->leaning;
  return std::nullopt;
}

}  // namespace tracklens
