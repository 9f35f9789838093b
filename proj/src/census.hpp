#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "domain.hpp"
#include "ingest.hpp"
#include "trace.hpp"

namespace tracklens {

// Disconnect categories as tabulated: Cryptomining, Disconnect and Unknown
// fold into Other.
enum class CategoryGroup { kAdvertising, kAnalytics, kContent, kSocial, kFingerprinting, kOther };
inline constexpr CategoryGroup kAllCategoryGroups[] = {
    CategoryGroup::kAdvertising, CategoryGroup::kAnalytics,      CategoryGroup::kContent,
    CategoryGroup::kSocial,      CategoryGroup::kFingerprinting, CategoryGroup::kOther};

std::string_view to_string(CategoryGroup g);
CategoryGroup group_of(TrackerCategory c);

struct VisitCookieCount {
  std::string visit_id;
  std::string site_id;
  Leaning leaning = Leaning::kLeft;
  Platform platform = Platform::kDesktop;
  std::string crawl_id;
  std::size_t cookie_count = 0;
  std::size_t fp_count = 0;
  std::size_t tp_count = 0;
};

struct SiteCensus {
  std::string site_id;
  Leaning leaning = Leaning::kLeft;
  Platform platform = Platform::kDesktop;
  // (crawl_id, cookie count) sorted by crawl id. Several visits of one site
  // in one crawl are summed.
  std::vector<std::pair<std::string, std::size_t>> crawl_counts;
  std::size_t median_cookie_count = 0;
  std::set<std::string> tp_cookie_domains;   // TPs that set >= 1 cookie
  std::set<std::string> tp_request_domains;  // TPs contacted or setting cookies
  std::map<CategoryGroup, std::size_t> category_counts;  // over tp_cookie_domains
};

struct CookieCensus {
  std::vector<VisitCookieCount> visits;  // sorted by (site, platform, crawl, visit)
  std::vector<SiteCensus> sites;         // sorted by (site, platform)
  std::map<std::string, TrackerCategory> tp_categories;

  const SiteCensus* find(std::string_view site_id, Platform platform) const;
  std::vector<double> medians(Leaning leaning, Platform platform) const;
  std::set<std::string> tp_domains(Platform platform) const;
};

// Cookies are deduplicated per visit by (setter domain, name). Throws
// kInvalidArgument naming every trace site missing from `labels`.
CookieCensus census(std::span<const CrawlTrace> traces, const LabelSet& labels,
                    const DisconnectMap& disconnect, const SuffixSet& suffixes);

struct PlatformOverlap {
  double both = 0;
  double desktop_only = 0;
  double mobile_only = 0;
  std::size_t union_size = 0;
  std::vector<std::string> sites;  // sites present on both platforms
};

// Fractions over the union of distinct cookie-setting TP domains of the sites
// both censuses cover. Throws when the site sets are disjoint.
PlatformOverlap platform_overlap(const CookieCensus& desktop, const CookieCensus& mobile);
// Convenience for a census holding both platforms.
PlatformOverlap platform_overlap(const CookieCensus& combined);

enum class Presence { kCookieSetting, kAnyRequest };
std::string_view to_string(Presence p);

struct CoverageRow {
  std::string tp_domain;
  std::size_t sites = 0;
  double coverage = 0;
  std::optional<double> baseline;
};

// Fraction of a group's labeled sites where each TP appears in any crawl.
// Ranked by coverage descending, ties by domain. `group` nullopt means all
// leanings. Throws when the group has no labeled sites.
std::vector<CoverageRow> tp_coverage(const CookieCensus& census, const LabelSet& labels,
                                     std::optional<Leaning> group, Presence presence,
                                     std::optional<Platform> platform = std::nullopt);

void join_baseline(std::vector<CoverageRow>& rows, const BaselineTable& baseline);

struct ShareRow {
  std::string tp_domain;
  std::size_t cookies = 0;
  double fraction = 0;
  double cumulative = 0;
};

struct CookieShare {
  std::size_t total_cookies = 0;
  std::vector<ShareRow> rows;  // TP setters, most cookies first

  // Share of all cookies set by the k largest TP setters.
  double top_k_share(std::size_t k) const;
};

// Uses the same per-visit dedup as the census. Throws when there are no cookies.
CookieShare cookie_share(std::span<const CrawlTrace> traces, const SuffixSet& suffixes);

}  // namespace tracklens
