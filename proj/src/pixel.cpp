#include "pixel.hpp"

#include <algorithm>
#include <tuple>

#include "error.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "strings.hpp"
#include "url.hpp"

namespace tracklens {

bool is_image_response(const HttpEvent& e) {
  if (e.kind != EventKind::kResponse) return false;
  const auto type = find_header(e, "Content-Type");
  return type && istarts_with(trim(*type), "image/");
}

std::vector<ImageCandidate> filter_image_events(std::span<const CrawlTrace> traces,
                                                const PixelOptions& options) {
  std::vector<ImageCandidate> out;
  for (const auto& t : traces) {
    for (const auto& e : t.events) {
      if (!is_image_response(e)) continue;
      std::optional<std::size_t> length;
      if (const auto h = find_header(e, "Content-Length")) {
        if (const auto n = parse_int64(trim(*h)); n && *n >= 0) length = static_cast<std::size_t>(*n);
      }
      if (!length && e.body_base64) {
        if (const auto body = base64_decode(*e.body_base64)) length = body->size();
      }
      if (!length || *length >= options.size_cap) continue;
      out.push_back({t.site.site_id, t.visit_id, t.crawl_id, e.url, e.event_id, *length, &e});
    }
  }
  return out;
}

PixelScan scan_pixels(std::span<const CrawlTrace> traces, const SuffixSet& suffixes,
                      const PixelOptions& options, unsigned jobs) {
  PixelScan scan;
  for (const auto& t : traces) {
    if (t.events.empty()) continue;
    scan.site_crawls[t.site.site_id].insert(t.crawl_id);
    for (const auto& e : t.events) scan.image_responses += is_image_response(e);
  }
  const auto candidates = filter_image_events(traces, options);
  scan.candidates = candidates.size();

  std::vector<std::optional<ImageInfo>> decoded(candidates.size());
  parallel_for(candidates.size(), jobs, [&](std::size_t i, unsigned) {
    const HttpEvent& e = *candidates[i].event;
    if (!e.body_base64) return;
    if (const auto body = base64_decode(*e.body_base64)) decoded[i] = decode_dimensions(*body);
  });

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& info = decoded[i];
    if (!info || info->format == ImageFormat::kUnknown) {
      ++scan.undecodable;
      continue;
    }
    if (info->width != 1 || info->height != 1) continue;
    const ImageCandidate& c = candidates[i];
    PixelFinding f;
    f.site_id = c.site_id;
    f.visit_id = c.visit_id;
    f.crawl_id = c.crawl_id;
    f.image_url = c.image_url;
    f.setter_domain = suffixes.try_registrable_domain(c.image_url).value_or(host_of(c.image_url));
    f.party = classify_party(suffixes, c.image_url, c.event->top_level_site.empty() ? c.site_id : c.event->top_level_site);
    f.content_length = c.content_length;
    f.format = info->format;
    f.width = info->width;
    f.height = info->height;
    f.evidence_event_id = c.event_id;
    scan.findings.push_back(std::move(f));
  }
  std::sort(scan.findings.begin(), scan.findings.end(), [](const PixelFinding& a, const PixelFinding& b) {
    return std::tie(a.site_id, a.visit_id, a.evidence_event_id) < std::tie(b.site_id, b.visit_id, b.evidence_event_id);
  });
  return scan;
}

PixelSummary pixel_summary(const PixelScan& scan, const LabelSet& labels, std::size_t top_k) {
  if (scan.image_responses == 0) throw Error(ErrorCode::kInvalidArgument, "no image responses in traces");
  PixelSummary s;
  s.image_responses = scan.image_responses;
  s.findings = scan.findings.size();
  s.fraction = static_cast<double>(s.findings) / static_cast<double>(s.image_responses);
  s.undecodable = scan.undecodable;

  std::map<std::string, std::map<std::string, std::size_t>> per_crawl;
  std::map<std::string, std::set<std::string>> tp_sites;
  std::map<std::string, std::size_t> tp_pixels;
  for (const auto& f : scan.findings) {
    ++per_crawl[f.site_id][f.crawl_id];
    if (f.party != Party::kThirdParty) continue;
    ++tp_pixels[f.setter_domain];
    tp_sites[f.setter_domain].insert(f.site_id);
  }

  std::map<Leaning, std::vector<std::size_t>> by_leaning;
  std::map<Leaning, std::size_t> leaning_sites;
  for (const auto& [site, crawls] : scan.site_crawls) {
    const auto leaning = labels.leaning_of(site);
    if (!leaning) throw Error(ErrorCode::kInvalidArgument, "traces reference unlabeled site: " + site);
    std::vector<std::size_t> counts;
    for (const auto& crawl : crawls) {
      const auto it = per_crawl.find(site);
      std::size_t n = 0;
      if (it != per_crawl.end()) {
        const auto jt = it->second.find(crawl);
        if (jt != it->second.end()) n = jt->second;
      }
      counts.push_back(n);
    }
    const std::size_t median = stats::median_lower(std::span<const std::size_t>(counts));
    by_leaning[*leaning].push_back(median);
    ++leaning_sites[*leaning];
    s.sites.push_back({site, *leaning, median});
  }
  for (auto& [l, values] : by_leaning) s.median_per_site[l] = stats::median_lower(std::span<const std::size_t>(values));
  std::sort(s.sites.begin(), s.sites.end(), [](const PixelSiteRow& a, const PixelSiteRow& b) {
    if (a.pixels != b.pixels) return a.pixels > b.pixels;
    return a.site_id < b.site_id;
  });

  for (const auto& [domain, n] : tp_pixels) {
    PixelTpRow row{domain, n, 0, {}};
    const auto& sites = tp_sites[domain];
    row.sites = sites.size();
    for (Leaning l : kAllLeanings) {
      const auto total = leaning_sites.count(l) ? leaning_sites[l] : 0;
      std::size_t hit = 0;
      for (const auto& site : sites) hit += labels.leaning_of(site) == l;
      row.site_fraction[l] = total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
    }
    s.top_tps.push_back(std::move(row));
  }
  s.distinct_tps = s.top_tps.size();
  std::sort(s.top_tps.begin(), s.top_tps.end(), [](const PixelTpRow& a, const PixelTpRow& b) {
    if (a.pixels != b.pixels) return a.pixels > b.pixels;
    return a.domain < b.domain;
  });
  if (s.top_tps.size() > top_k) s.top_tps.resize(top_k);
  return s;
}

}  // namespace tracklens
