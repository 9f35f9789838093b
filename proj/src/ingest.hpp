#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "domain.hpp"
#include "trace.hpp"

namespace tracklens {

// Where an ingested visit sits within a crawl campaign. The adapters cannot
// learn these from the input file.
struct VisitContext {
  std::string visit_id;
  std::string crawl_id = "crawl-0";
  CrawlMode crawl_mode = CrawlMode::kStateless;
  int visit_order = 0;
  // cookies.txt carries no set time; this stands in for it.
  std::int64_t capture_time_ms = 0;
};

struct IngestResult {
  CrawlTrace trace;
  std::vector<std::string> warnings;
};

// HAR 1.2. Each entry becomes a Request and a Response event; a 3xx response
// with a Location header or redirectURL adds a Redirect event. Set-Cookie
// response headers become cookie records.
IngestResult ingest_har(std::string_view har_json, const SiteLabel& site,
                        const SuffixSet& suffixes, const VisitContext& ctx);

// Netscape cookies.txt (7 tab-separated fields). Events and JS calls stay
// empty, which is how mobile captures arrive.
IngestResult ingest_cookies_txt(std::string_view text, const SiteLabel& site,
                                const SuffixSet& suffixes, const VisitContext& ctx);

struct ParsedSetCookie {
  std::string name;
  std::string value;
  std::optional<std::string> domain;  // leading dot stripped, lowercased
  std::optional<std::int64_t> expiry;
};

// Max-Age wins over Expires; a non-positive Max-Age expires at `now_ms`.
std::optional<ParsedSetCookie> parse_set_cookie(std::string_view header, std::int64_t now_ms);

enum class TrackerCategory {
  kAdvertising,
  kAnalytics,
  kContent,
  kSocial,
  kFingerprinting,
  kCryptomining,
  kDisconnect,
  kUnknown,
};

std::string_view to_string(TrackerCategory c);
std::optional<TrackerCategory> parse_tracker_category(std::string_view disconnect_name);

// Disconnect services.json: categories -> entities -> {site url -> domains}.
class DisconnectMap {
 public:
  static DisconnectMap parse(std::string_view services_json);
  static DisconnectMap load(const std::string& path);

  // Longest hostname-suffix match at label boundaries, which covers the
  // registrable-domain fallback. Unlisted hosts map to kUnknown.
  TrackerCategory lookup(std::string_view host) const;
  std::size_t size() const { return domains_.size(); }
  void add(std::string domain, TrackerCategory category);

 private:
  std::map<std::string, TrackerCategory> domains_;
};

class BaselineTable {
 public:
  // CSV with header "domain,fraction".
  static BaselineTable parse(std::string_view csv);
  static BaselineTable load(const std::string& path);

  std::optional<double> lookup(std::string_view domain) const;
  const std::map<std::string, double>& entries() const { return fractions_; }

 private:
  std::map<std::string, double> fractions_;
};

// CSV with header "site_id,leaning,platform,display_name,followers".
std::vector<SiteLabel> parse_labels_csv(std::string_view csv);
LabelSet load_labels(const std::string& path);

}  // namespace tracklens
