#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "census.hpp"
#include "csync.hpp"
#include "fingerprint.hpp"
#include "pixel.hpp"
#include "trace.hpp"

namespace tracklens {

inline constexpr int kReportSchemaVersion = 1;

// Provenance stamped on every section.
struct SectionMeta {
  std::string config_hash;
  std::vector<std::string> roster;  // distinct site ids of the analysed traces, sorted
};

std::vector<std::string> site_roster(std::span<const CrawlTrace> traces);

// Section documents. Each is what the matching command writes as its JSON
// summary and what the report stitches together.
Json census_section(const CookieCensus& census, const LabelSet& labels, const CookieShare* share,
                    const BaselineTable* baseline, const SectionMeta& meta, std::size_t top_k = 10);
Json csync_section(const CsyncAnalysis& analysis, const CsyncOptions& options, const SectionMeta& meta);
Json fingerprint_section(std::span<const FingerprintFinding> findings, const FingerprintSummary& summary,
                         const FingerprintOptions& options, const SectionMeta& meta);
Json pixel_section(const PixelSummary& summary, const PixelOptions& options, const SectionMeta& meta,
                   std::size_t top_sites = 20);

struct ReportSections {
  std::optional<Json> census;
  std::optional<Json> csync;
  std::optional<Json> fingerprint;
  std::optional<Json> pixels;
};

struct ReportBundle {
  Json report;
  std::vector<std::pair<std::string, std::string>> files;  // file name -> contents, report.json first
};

// Throws kInvalidArgument when no section is present and kInconsistent when
// present sections were computed over different site rosters.
ReportBundle build_report(const ReportSections& sections);

// Figure and table CSVs, rendered from section documents.
std::string table1_csv(const Json& csync);
std::string fig2_cdf_csv(const Json& census);
std::string fig3_categories_csv(const Json& census);
std::string fig4_tp_coverage_csv(const Json& census);
std::string mobile_desktop_csv(const Json& census);
std::string fig5_cdf_csv(const Json& csync);
std::string fig6_csync_top_tp_csv(const Json& csync);
std::string fig7_cdf_csv(const Json& pixels);
std::string fig8_top_sites_csv(const Json& pixels);
std::string fig9_top_pixel_tps_csv(const Json& pixels);

// Canonical serialization used for every JSON artifact.
std::string dump_json(const Json& j);

}  // namespace tracklens
