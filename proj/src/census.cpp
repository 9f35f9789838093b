#include "census.hpp"

#include <algorithm>
#include <tuple>

#include "error.hpp"
#include "stats.hpp"
#include "strings.hpp"
#include "url.hpp"

namespace tracklens {

namespace {

std::string domain_or_host(const SuffixSet& suffixes, std::string_view host) {
  if (auto d = suffixes.try_registrable_domain(host)) return *d;
  return host_of(host);
}

struct DedupedCookie {
  std::string setter_host;
  std::string setter_domain;
  bool third_party;
};

// One entry per (setter domain, name) within a visit.
std::vector<DedupedCookie> dedup_cookies(const CrawlTrace& t, const SuffixSet& suffixes,
                                         const std::string& site_domain) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<DedupedCookie> out;
  for (const auto& c : t.cookies) {
    std::string host = to_lower_ascii(trim(c.setter_domain));
    while (!host.empty() && host.front() == '.') host.erase(0, 1);
    if (!seen.emplace(host, c.name).second) continue;
    std::string domain = domain_or_host(suffixes, host);
    const bool tp = domain != site_domain;
    out.push_back({std::move(host), std::move(domain), tp});
  }
  return out;
}

}  // namespace

std::string_view to_string(CategoryGroup g) {
  switch (g) {
    case CategoryGroup::kAdvertising: return "Advertising";
    case CategoryGroup::kAnalytics: return "Analytics";
    case CategoryGroup::kContent: return "Content";
    case CategoryGroup::kSocial: return "Social";
    case CategoryGroup::kFingerprinting: return "Fingerprinting";
    case CategoryGroup::kOther: return "Other";
  }
  return "Other";
}

CategoryGroup group_of(TrackerCategory c) {
  switch (c) {
    case TrackerCategory::kAdvertising: return CategoryGroup::kAdvertising;
    case TrackerCategory::kAnalytics: return CategoryGroup::kAnalytics;
    case TrackerCategory::kContent: return CategoryGroup::kContent;
    case TrackerCategory::kSocial: return CategoryGroup::kSocial;
    case TrackerCategory::kFingerprinting: return CategoryGroup::kFingerprinting;
    default: return CategoryGroup::kOther;
  }
}

std::string_view to_string(Presence p) {
  return p == Presence::kCookieSetting ? "cookie_setting" : "any_request";
}

const SiteCensus* CookieCensus::find(std::string_view site_id, Platform platform) const {
  for (const auto& s : sites)
    if (s.site_id == site_id && s.platform == platform) return &s;
  return nullptr;
}

std::vector<double> CookieCensus::medians(Leaning leaning, Platform platform) const {
  std::vector<double> out;
  for (const auto& s : sites)
    if (s.leaning == leaning && s.platform == platform)
      out.push_back(static_cast<double>(s.median_cookie_count));
  return out;
}

std::set<std::string> CookieCensus::tp_domains(Platform platform) const {
  std::set<std::string> out;
  for (const auto& s : sites)
    if (s.platform == platform) out.insert(s.tp_cookie_domains.begin(), s.tp_cookie_domains.end());
  return out;
}

CookieCensus census(std::span<const CrawlTrace> traces, const LabelSet& labels,
                    const DisconnectMap& disconnect, const SuffixSet& suffixes) {
  std::set<std::string> unlabeled;
  for (const auto& t : traces)
    if (!labels.find(t.site.site_id, t.site.platform)) unlabeled.insert(t.site.site_id);
  if (!unlabeled.empty())
    throw Error(ErrorCode::kInvalidArgument,
                "traces reference unlabeled sites: " +
                    join(std::vector<std::string>(unlabeled.begin(), unlabeled.end()), ", "));

  CookieCensus out;
  using SiteKey = std::pair<std::string, Platform>;
  std::map<SiteKey, SiteCensus> sites;
  std::map<SiteKey, std::map<std::string, std::size_t>> crawl_counts;
  std::map<std::string, std::set<std::string>> hosts_by_tp;

  for (const auto& t : traces) {
    const SiteLabel& label = *labels.find(t.site.site_id, t.site.platform);
    const std::string site_domain = domain_or_host(suffixes, label.site_id);
    const SiteKey key{label.site_id, label.platform};
    SiteCensus& sc = sites[key];
    sc.site_id = label.site_id;
    sc.leaning = label.leaning;
    sc.platform = label.platform;

    VisitCookieCount v;
    v.visit_id = t.visit_id;
    v.site_id = label.site_id;
    v.leaning = label.leaning;
    v.platform = label.platform;
    v.crawl_id = t.crawl_id;
    for (const auto& c : dedup_cookies(t, suffixes, site_domain)) {
      ++v.cookie_count;
      if (c.third_party) {
        ++v.tp_count;
        sc.tp_cookie_domains.insert(c.setter_domain);
        sc.tp_request_domains.insert(c.setter_domain);
        hosts_by_tp[c.setter_domain].insert(c.setter_host);
      } else {
        ++v.fp_count;
      }
    }
    for (const auto& e : t.events) {
      if (e.kind != EventKind::kRequest) continue;
      const std::string host = host_of(e.url);
      if (host.empty()) continue;
      const std::string d = domain_or_host(suffixes, host);
      if (d == site_domain) continue;
      sc.tp_request_domains.insert(d);
      hosts_by_tp[d].insert(host);
    }
    crawl_counts[key][t.crawl_id] += v.cookie_count;
    out.visits.push_back(std::move(v));
  }

  for (const auto& [domain, hosts] : hosts_by_tp) {
    TrackerCategory cat = disconnect.lookup(domain);
    for (auto it = hosts.begin(); cat == TrackerCategory::kUnknown && it != hosts.end(); ++it)
      cat = disconnect.lookup(*it);
    out.tp_categories[domain] = cat;
  }

  for (auto& [key, sc] : sites) {
    std::vector<std::size_t> counts;
    for (const auto& [crawl, n] : crawl_counts[key]) {
      sc.crawl_counts.emplace_back(crawl, n);
      counts.push_back(n);
    }
    sc.median_cookie_count = stats::median_lower(std::span<const std::size_t>(counts));
    for (CategoryGroup g : kAllCategoryGroups) sc.category_counts[g] = 0;
    for (const auto& d : sc.tp_cookie_domains) ++sc.category_counts[group_of(out.tp_categories.at(d))];
    out.sites.push_back(std::move(sc));
  }
  std::sort(out.visits.begin(), out.visits.end(), [](const auto& a, const auto& b) {
    return std::tie(a.site_id, a.platform, a.crawl_id, a.visit_id) <
           std::tie(b.site_id, b.platform, b.crawl_id, b.visit_id);
  });
  return out;
}

PlatformOverlap platform_overlap(const CookieCensus& desktop, const CookieCensus& mobile) {
  std::set<std::string> desktop_sites, mobile_sites;
  for (const auto& s : desktop.sites)
    if (s.platform == Platform::kDesktop) desktop_sites.insert(s.site_id);
  for (const auto& s : mobile.sites)
    if (s.platform == Platform::kMobile) mobile_sites.insert(s.site_id);
  PlatformOverlap out;
  std::set_intersection(desktop_sites.begin(), desktop_sites.end(), mobile_sites.begin(),
                        mobile_sites.end(), std::back_inserter(out.sites));
  if (out.sites.empty())
    throw Error(ErrorCode::kInvalidArgument, "desktop and mobile censuses share no sites");

  std::set<std::string> d, m;
  for (const auto& site : out.sites) {
    const auto* ds = desktop.find(site, Platform::kDesktop);
    const auto* ms = mobile.find(site, Platform::kMobile);
    d.insert(ds->tp_cookie_domains.begin(), ds->tp_cookie_domains.end());
    m.insert(ms->tp_cookie_domains.begin(), ms->tp_cookie_domains.end());
  }
  std::set<std::string> all = d;
  all.insert(m.begin(), m.end());
  out.union_size = all.size();
  if (all.empty()) return out;
  std::size_t both = 0, d_only = 0, m_only = 0;
  for (const auto& x : all) {
    const bool in_d = d.count(x), in_m = m.count(x);
    if (in_d && in_m) ++both;
    else if (in_d) ++d_only;
    else ++m_only;
  }
  const double n = static_cast<double>(all.size());
  out.both = static_cast<double>(both) / n;
  out.desktop_only = static_cast<double>(d_only) / n;
  out.mobile_only = static_cast<double>(m_only) / n;
  return out;
}

PlatformOverlap platform_overlap(const CookieCensus& combined) {
  return platform_overlap(combined, combined);
}

std::vector<CoverageRow> tp_coverage(const CookieCensus& census, const LabelSet& labels,
                                     std::optional<Leaning> group, Presence presence,
                                     std::optional<Platform> platform) {
  std::set<std::string> group_sites;
  for (const auto& l : labels.all()) {
    if (group && l.leaning != *group) continue;
    if (platform && l.platform != *platform) continue;
    group_sites.insert(l.site_id);
  }
  if (group_sites.empty())
    throw Error(ErrorCode::kInvalidArgument,
                "coverage group '" + std::string(group ? to_string(*group) : "all") + "' has no sites");

  std::map<std::string, std::set<std::string>> sites_by_tp;
  for (const auto& s : census.sites) {
    if (!group_sites.count(s.site_id)) continue;
    if (platform && s.platform != *platform) continue;
    const auto& domains = presence == Presence::kCookieSetting ? s.tp_cookie_domains : s.tp_request_domains;
    for (const auto& d : domains) sites_by_tp[d].insert(s.site_id);
  }
  std::vector<CoverageRow> rows;
  const double n = static_cast<double>(group_sites.size());
  for (const auto& [domain, sites] : sites_by_tp)
    rows.push_back({domain, sites.size(), static_cast<double>(sites.size()) / n, std::nullopt});
  std::sort(rows.begin(), rows.end(), [](const CoverageRow& a, const CoverageRow& b) {
    if (a.sites != b.sites) return a.sites > b.sites;
    return a.tp_domain < b.tp_domain;
  });
  return rows;
}

void join_baseline(std::vector<CoverageRow>& rows, const BaselineTable& baseline) {
  for (auto& r : rows) r.baseline = baseline.lookup(r.tp_domain);
}

double CookieShare::top_k_share(std::size_t k) const {
  if (rows.empty()) return 0.0;
  return rows[std::min(k, rows.size()) - 1].cumulative;
}

CookieShare cookie_share(std::span<const CrawlTrace> traces, const SuffixSet& suffixes) {
  CookieShare out;
  std::map<std::string, std::size_t> by_domain;
  for (const auto& t : traces) {
    const std::string site_domain = domain_or_host(suffixes, t.site.site_id);
    for (const auto& c : dedup_cookies(t, suffixes, site_domain)) {
      ++out.total_cookies;
      if (c.third_party) ++by_domain[c.setter_domain];
    }
  }
  if (out.total_cookies == 0) throw Error(ErrorCode::kInvalidArgument, "no cookies to apportion");
  for (const auto& [domain, n] : by_domain) out.rows.push_back({domain, n, 0.0, 0.0});
  std::sort(out.rows.begin(), out.rows.end(), [](const ShareRow& a, const ShareRow& b) {
    if (a.cookies != b.cookies) return a.cookies > b.cookies;
    return a.tp_domain < b.tp_domain;
  });
  const double total = static_cast<double>(out.total_cookies);
  std::size_t running = 0;
  for (auto& r : out.rows) {
    running += r.cookies;
    r.fraction = static_cast<double>(r.cookies) / total;
    r.cumulative = static_cast<double>(running) / total;
  }
  return out;
}

}  // namespace tracklens
