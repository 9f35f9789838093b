#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "domain.hpp"
#include "image_header.hpp"
#include "trace.hpp"

namespace tracklens {

struct PixelOptions {
  std::size_t size_cap = 1024;  // bytes; candidates must be strictly smaller
};

bool is_image_response(const HttpEvent& e);

struct ImageCandidate {
  std::string site_id;
  std::string visit_id;
  std::string crawl_id;
  std::string image_url;
  std::string event_id;
  std::size_t content_length = 0;
  const HttpEvent* event = nullptr;  // owned by the traces passed in
};

// Image responses under the size cap. Length is the Content-Length header,
// else the body size; responses with neither are skipped.
std::vector<ImageCandidate> filter_image_events(std::span<const CrawlTrace> traces,
                                                const PixelOptions& options);

struct PixelFinding {
  std::string site_id;
  std::string visit_id;
  std::string crawl_id;
  std::string image_url;
  std::string setter_domain;
  Party party = Party::kThirdParty;
  std::size_t content_length = 0;
  ImageFormat format = ImageFormat::kUnknown;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::string evidence_event_id;

  bool operator==(const PixelFinding&) const = default;
};

struct PixelScan {
  std::size_t image_responses = 0;  // every image/* response, any size
  std::size_t candidates = 0;
  std::size_t undecodable = 0;  // header-only or unrecognized bytes
  std::vector<PixelFinding> findings;  // sorted by (site, visit, event)
  // Sites seen with HTTP events, and the crawls each was visited in.
  std::map<std::string, std::set<std::string>> site_crawls;
};

PixelScan scan_pixels(std::span<const CrawlTrace> traces, const SuffixSet& suffixes,
                      const PixelOptions& options, unsigned jobs = 1);

struct PixelSiteRow {
  std::string site_id;
  Leaning leaning = Leaning::kLeft;
  std::size_t pixels = 0;  // median over the site's crawls
};

struct PixelTpRow {
  std::string domain;
  std::size_t pixels = 0;
  std::size_t sites = 0;
  std::map<Leaning, double> site_fraction;
};

struct PixelSummary {
  std::size_t image_responses = 0;
  std::size_t findings = 0;
  double fraction = 0;
  std::size_t undecodable = 0;
  std::map<Leaning, std::size_t> median_per_site;  // leanings without sites are absent
  std::vector<PixelSiteRow> sites;                 // every site, most pixels first
  std::vector<PixelTpRow> top_tps;
  std::size_t distinct_tps = 0;
};

// Throws when there were no image responses at all.
PixelSummary pixel_summary(const PixelScan& scan, const LabelSet& labels, std::size_t top_k = 10);

}  // namespace tracklens
