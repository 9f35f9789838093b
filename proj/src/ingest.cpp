#include "ingest.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "strings.hpp"
#include "url.hpp"

namespace tracklens {

namespace {

std::string default_visit_id(const SiteLabel& site, const VisitContext& ctx) {
  return ctx.visit_id.empty() ? site.site_id + "/" + ctx.crawl_id : ctx.visit_id;
}

CrawlTrace empty_trace(const SiteLabel& site, const VisitContext& ctx) {
  CrawlTrace t;
  t.visit_id = default_visit_id(site, ctx);
  t.site = site;
  t.crawl_id = ctx.crawl_id;
  t.crawl_mode = ctx.crawl_mode;
  t.visit_order = ctx.visit_order;
  return t;
}

std::vector<std::pair<std::string, std::string>> har_headers(const Json& message) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto it = message.find("headers");
  if (it == message.end() || !it->is_array()) return out;
  for (const auto& h : *it) {
    if (!h.is_object()) continue;
    const auto n = h.find("name");
    const auto v = h.find("value");
    if (n == h.end() || v == h.end() || !n->is_string() || !v->is_string()) continue;
    out.emplace_back(n->get<std::string>(), v->get<std::string>());
  }
  return out;
}

std::string resolve_location(std::string_view base, std::string_view location) {
  if (location.find("://") != std::string_view::npos) return std::string(location);
  const auto url = parse_http_url(base);
  if (!url) return std::string(location);
  std::string origin = url->scheme + "://" + url->host;
  if (url->port) origin += ":" + std::to_string(*url->port);
  if (location.substr(0, 2) == "//") return url->scheme + ":" + std::string(location);
  if (!location.empty() && location.front() == '/') return origin + std::string(location);
  const auto slash = url->path.rfind('/');
  const std::string dir = slash == std::string::npos ? "/" : url->path.substr(0, slash + 1);
  return origin + dir + std::string(location);
}

bool same_site(const SuffixSet& suffixes, std::string_view host, std::string_view site) {
  const auto a = suffixes.try_registrable_domain(host);
  const auto b = suffixes.try_registrable_domain(site);
  return a && b && *a == *b;
}

}  // namespace

std::optional<ParsedSetCookie> parse_set_cookie(std::string_view header, std::int64_t now_ms) {
  const auto parts = split(header, ';');
  const std::string_view pair = trim(parts.front());
  const auto eq = pair.find('=');
  if (eq == std::string_view::npos || eq == 0) return std::nullopt;
  ParsedSetCookie out;
  out.name = std::string(trim(pair.substr(0, eq)));
  out.value = std::string(trim(pair.substr(eq + 1)));
  std::optional<std::int64_t> max_age_expiry, expires;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string_view attr = trim(parts[i]);
    const auto aeq = attr.find('=');
    const std::string_view key = trim(attr.substr(0, aeq));
    const std::string_view val = aeq == std::string_view::npos ? std::string_view{} : trim(attr.substr(aeq + 1));
    if (iequals(key, "max-age")) {
      if (const auto secs = parse_int64(val))
        max_age_expiry = *secs <= 0 ? now_ms : now_ms + *secs * 1000;
    } else if (iequals(key, "expires")) {
      expires = parse_http_date_ms(val);
    } else if (iequals(key, "domain") && !val.empty()) {
      std::string_view d = val;
      while (!d.empty() && d.front() == '.') d.remove_prefix(1);
      out.domain = to_lower_ascii(d);
    }
  }
  out.expiry = max_age_expiry ? max_age_expiry : expires;
  return out;
}

IngestResult ingest_har(std::string_view har_json, const SiteLabel& site,
                        const SuffixSet& suffixes, const VisitContext& ctx) {
  Json doc;
  try {
    doc = Json::parse(har_json);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("HAR is not valid JSON: ") + e.what());
  }
  const auto log = doc.is_object() ? doc.find("log") : doc.end();
  if (!doc.is_object() || log == doc.end() || !log->is_object() || !log->contains("entries") ||
      !(*log)["entries"].is_array())
    throw Error(ErrorCode::kFormat, "not a HAR document (expected log.entries)");

  IngestResult result{empty_trace(site, ctx), {}};
  CrawlTrace& trace = result.trace;
  std::size_t next_id = 0;
  auto new_event = [&](EventKind kind) {
    HttpEvent e;
    e.event_id = trace.visit_id + ":e" + std::to_string(next_id++);
    e.visit_id = trace.visit_id;
    e.kind = kind;
    e.top_level_site = site.site_id;
    return e;
  };

  const Json& entries = (*log)["entries"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Json& entry = entries[i];
    const Json* request = entry.is_object() && entry.contains("request") ? &entry["request"] : nullptr;
    if (!request || !request->is_object() || !request->contains("url") ||
        !(*request)["url"].is_string() || (*request)["url"].get<std::string>().empty()) {
      result.warnings.push_back("entry " + std::to_string(i) + ": no request URL, skipped");
      continue;
    }
    const std::string url = (*request)["url"].get<std::string>();
    std::int64_t started = 0;
    if (entry.contains("startedDateTime") && entry["startedDateTime"].is_string()) {
      if (const auto ms = parse_iso8601_ms(entry["startedDateTime"].get<std::string>())) {
        started = *ms;
      } else {
        result.warnings.push_back("entry " + std::to_string(i) + ": unparseable startedDateTime");
      }
    }
    std::int64_t finished = started;
    if (entry.contains("time") && entry["time"].is_number() && entry["time"].get<double>() > 0)
      finished = started + static_cast<std::int64_t>(std::llround(entry["time"].get<double>()));

    HttpEvent req = new_event(EventKind::kRequest);
    req.url = url;
    if (request->contains("method") && (*request)["method"].is_string())
      req.method = (*request)["method"].get<std::string>();
    req.headers = har_headers(*request);
    if (const auto ref = find_header(req, "Referer")) req.referrer = std::string(*ref);
    req.timestamp = started;
    trace.events.push_back(std::move(req));

    const Json* response = entry.contains("response") && entry["response"].is_object() ? &entry["response"] : nullptr;
    if (!response) {
      result.warnings.push_back("entry " + std::to_string(i) + ": no response");
      continue;
    }
    HttpEvent resp = new_event(EventKind::kResponse);
    resp.url = url;
    resp.method = trace.events.back().method;
    resp.headers = har_headers(*response);
    if (response->contains("status") && (*response)["status"].is_number_integer())
      resp.status = (*response)["status"].get<int>();
    resp.timestamp = finished;
    if (response->contains("content") && (*response)["content"].is_object()) {
      const Json& content = (*response)["content"];
      if (content.contains("text") && content["text"].is_string()) {
        const std::string text = content["text"].get<std::string>();
        const bool is_b64 = content.contains("encoding") && content["encoding"].is_string() &&
                            iequals(content["encoding"].get<std::string>(), "base64");
        resp.body_base64 = is_b64 ? text : base64_encode(std::vector<std::uint8_t>(text.begin(), text.end()));
      }
    }

    std::optional<std::string> location;
    if (const auto loc = find_header(resp, "Location"); loc && !loc->empty())
      location = std::string(*loc);
    else if (response->contains("redirectURL") && (*response)["redirectURL"].is_string() &&
             !(*response)["redirectURL"].get<std::string>().empty())
      location = (*response)["redirectURL"].get<std::string>();

    const std::string response_host = host_of(url);
    for (const auto& [name, value] : resp.headers) {
      if (!iequals(name, "Set-Cookie")) continue;
      // Some exporters fold several cookies into one header, newline separated.
      for (auto line : split(value, '\n')) {
        if (trim(line).empty()) continue;
        const auto parsed = parse_set_cookie(line, finished);
        if (!parsed) {
          result.warnings.push_back("entry " + std::to_string(i) + ": unparseable Set-Cookie");
          continue;
        }
        CookieRecord c;
        c.visit_id = trace.visit_id;
        c.setter_domain = parsed->domain.value_or(response_host);
        c.name = parsed->name;
        c.value = parsed->value;
        c.set_time = finished;
        c.expiry = parsed->expiry;
        c.is_first_party_context = same_site(suffixes, c.setter_domain, site.site_id);
        c.crawl_id = ctx.crawl_id;
        trace.cookies.push_back(std::move(c));
      }
    }
    const int status = resp.status.value_or(0);
    trace.events.push_back(std::move(resp));
    if (status >= 300 && status < 400 && location) {
      HttpEvent redirect = new_event(EventKind::kRedirect);
      redirect.url = url;
      redirect.method = trace.events.back().method;
      redirect.status = status;
      redirect.location = resolve_location(url, *location);
      redirect.timestamp = finished;
      trace.events.push_back(std::move(redirect));
    }
  }
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const HttpEvent& a, const HttpEvent& b) { return a.timestamp < b.timestamp; });
  return result;
}

IngestResult ingest_cookies_txt(std::string_view text, const SiteLabel& site,
                                const SuffixSet& suffixes, const VisitContext& ctx) {
  IngestResult result{empty_trace(site, ctx), {}};
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    constexpr std::string_view kHttpOnly = "#HttpOnly_";
    if (line.substr(0, kHttpOnly.size()) == kHttpOnly) line.remove_prefix(kHttpOnly.size());
    else if (line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 7) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                std::to_string(fields.size()));
      continue;
    }
    std::string_view domain = trim(fields[0]);
    while (!domain.empty() && domain.front() == '.') domain.remove_prefix(1);
    const auto expiry_secs = parse_int64(fields[4]);
    if (!expiry_secs) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": bad expiry field");
      continue;
    }
    CookieRecord c;
    c.visit_id = result.trace.visit_id;
    c.setter_domain = to_lower_ascii(domain);
    c.name = std::string(fields[5]);
    c.value = std::string(fields[6]);
    c.set_time = ctx.capture_time_ms;
    if (*expiry_secs != 0) c.expiry = *expiry_secs * 1000;
    c.is_first_party_context = same_site(suffixes, c.setter_domain, site.site_id);
    c.crawl_id = ctx.crawl_id;
    result.trace.cookies.push_back(std::move(c));
  }
  return result;
}

// ---- Disconnect ---------------------------------------------------------------

std::string_view to_string(TrackerCategory c) {
  switch (c) {
    case TrackerCategory::kAdvertising: return "Advertising";
    case TrackerCategory::kAnalytics: return "Analytics";
    case TrackerCategory::kContent: return "Content";
    case TrackerCategory::kSocial: return "Social";
    case TrackerCategory::kFingerprinting: return "Fingerprinting";
    case TrackerCategory::kCryptomining: return "Cryptomining";
    case TrackerCategory::kDisconnect: return "Disconnect";
    case TrackerCategory::kUnknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<TrackerCategory> parse_tracker_category(std::string_view name) {
  if (iequals(name, "Advertising")) return TrackerCategory::kAdvertising;
  if (iequals(name, "Analytics")) return TrackerCategory::kAnalytics;
  if (iequals(name, "Content")) return TrackerCategory::kContent;
  if (iequals(name, "Social")) return TrackerCategory::kSocial;
  // Later list revisions split fingerprinting into two buckets.
  if (istarts_with(name, "Fingerprinting")) return TrackerCategory::kFingerprinting;
  if (iequals(name, "Cryptomining")) return TrackerCategory::kCryptomining;
  if (iequals(name, "Disconnect")) return TrackerCategory::kDisconnect;
  return std::nullopt;
}

void DisconnectMap::add(std::string domain, TrackerCategory category) {
  domains_.emplace(to_lower_ascii(trim(domain)), category);
}

DisconnectMap DisconnectMap::parse(std::string_view services_json) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(services_json);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("Disconnect list is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_object())
    throw Error(ErrorCode::kFormat, "Disconnect list lacks a 'categories' object");

  // A domain listed under several categories keeps the first one in
  // document order.
  DisconnectMap map;
  for (const auto& [category_name, entities] : doc["categories"].items()) {
    const auto category = parse_tracker_category(category_name);
    if (!category || !entities.is_array()) continue;
    for (const auto& entity : entities) {
      if (!entity.is_object()) continue;
      for (const auto& [entity_name, sites] : entity.items()) {
        if (!sites.is_object()) continue;
        for (const auto& [site_url, domains] : sites.items()) {
          if (!domains.is_array()) continue;  // e.g. "performance": "true"
          for (const auto& d : domains)
            if (d.is_string()) map.add(d.get<std::string>(), *category);
        }
      }
    }
  }
  return map;
}

DisconnectMap DisconnectMap::load(const std::string& path) { return parse(read_file(path)); }

TrackerCategory DisconnectMap::lookup(std::string_view host_in) const {
  std::string host = host_of(host_in);
  std::string_view h = host;
  while (!h.empty()) {
    const auto it = domains_.find(std::string(h));
    if (it != domains_.end()) return it->second;
    const auto dot = h.find('.');
    if (dot == std::string_view::npos) break;
    h.remove_prefix(dot + 1);
  }
  return TrackerCategory::kUnknown;
}

// ---- CSV inputs ---------------------------------------------------------------

namespace {

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                std::initializer_list<std::string_view> required,
                                                std::string_view what) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[to_lower_ascii(trim(header[i]))] = i;
  for (auto col : required)
    if (!idx.count(std::string(col)))
      throw Error(ErrorCode::kFormat, std::string(what) + " CSV lacks column '" + std::string(col) + "'");
  return idx;
}

}  // namespace

BaselineTable BaselineTable::parse(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::kFormat, "baseline CSV is empty");
  const auto idx = header_index(rows[0], {"domain", "fraction"}, "baseline");
  BaselineTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < rows[0].size())
      throw Error(ErrorCode::kFormat, "baseline row " + std::to_string(r + 1) + " is short");
    const auto fraction = parse_double(row[idx.at("fraction")]);
    if (!fraction || *fraction < 0.0 || *fraction > 1.0)
      throw Error(ErrorCode::kFormat, "baseline row " + std::to_string(r + 1) + ": fraction outside [0,1]");
    table.fractions_[to_lower_ascii(trim(row[idx.at("domain")]))] = *fraction;
  }
  return table;
}

BaselineTable BaselineTable::load(const std::string& path) { return parse(read_file(path)); }

std::optional<double> BaselineTable::lookup(std::string_view domain) const {
  const auto it = fractions_.find(to_lower_ascii(domain));
  if (it == fractions_.end()) return std::nullopt;
  return it->second;
}

std::vector<SiteLabel> parse_labels_csv(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::kFormat, "labels CSV is empty");
  const auto idx = header_index(rows[0], {"site_id", "leaning", "platform"}, "labels");
  auto column = [&](const std::vector<std::string>& row, const char* name) -> std::string {
    const auto it = idx.find(name);
    if (it == idx.end() || it->second >= row.size()) return {};
    return std::string(trim(row[it->second]));
  };
  std::vector<SiteLabel> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "labels row " + std::to_string(r + 1);
    SiteLabel label;
    label.site_id = to_lower_ascii(column(row, "site_id"));
    if (label.site_id.empty()) throw Error(ErrorCode::kFormat, where + ": empty site_id");
    const std::string leaning = column(row, "leaning");
    const auto l = parse_leaning(leaning);
    if (!l) throw Error(ErrorCode::kInvalidArgument, where + ": unknown leaning '" + leaning + "'");
    label.leaning = *l;
    const std::string platform = column(row, "platform");
    const auto p = parse_platform(platform);
    if (!p) throw Error(ErrorCode::kInvalidArgument, where + ": unknown platform '" + platform + "'");
    label.platform = *p;
    label.display_name = column(row, "display_name");
    const std::string followers = column(row, "followers");
    if (!followers.empty()) {
      const auto f = parse_int64(followers);
      if (!f || *f < 0) throw Error(ErrorCode::kFormat, where + ": followers must be a non-negative integer");
      label.followers = *f;
    }
    out.push_back(std::move(label));
  }
  // LabelSet enforces uniqueness; surface it here as well so a bare parse fails.
  LabelSet check(out);
  return out;
}

LabelSet load_labels(const std::string& path) { return LabelSet(parse_labels_csv(read_file(path))); }

}  // namespace tracklens
