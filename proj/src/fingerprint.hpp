#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "domain.hpp"
#include "trace.hpp"

namespace tracklens {

enum class FingerprintKind { kCanvas, kWebRtc, kAudioContext };
inline constexpr FingerprintKind kAllFingerprintKinds[] = {
    FingerprintKind::kCanvas, FingerprintKind::kWebRtc, FingerprintKind::kAudioContext};
std::string_view to_string(FingerprintKind k);

struct FingerprintOptions {
  // Smallest extracted canvas area that counts, per side.
  int min_canvas_width = 16;
  int min_canvas_height = 16;
  // Text drawing or text styling must happen no later than the extraction.
  bool require_text_before_extract = true;
  // AudioContext needs a read of processed samples, not just synthesis.
  bool require_buffer_read = true;
};

// The calls one script made during one visit, with their ids.
struct ScriptActivity {
  std::string visit_id;
  std::string site_id;
  std::string script_url;
  std::vector<std::pair<std::string, JsApiCall>> calls;  // (call id, call)
};

struct FingerprintFinding {
  std::string visit_id;
  std::string site_id;
  std::string script_url;
  std::string script_domain;
  FingerprintKind kind = FingerprintKind::kCanvas;
  std::vector<std::string> evidence;  // call ids

  bool operator==(const FingerprintFinding&) const = default;
};

// Groups calls by (visit, script URL).
std::vector<ScriptActivity> group_script_activity(std::span<const CrawlTrace> traces);

// Each returns the ids of the calls that satisfy the criteria, or nullopt.
std::optional<std::vector<std::string>> detect_canvas(const ScriptActivity& script,
                                                      const FingerprintOptions& options);
std::optional<std::vector<std::string>> detect_webrtc(const ScriptActivity& script);
std::optional<std::vector<std::string>> detect_audiocontext(const ScriptActivity& script,
                                                            const FingerprintOptions& options);

// All three detectors over every script of every visit. Sorted by (site,
// visit, script, kind).
std::vector<FingerprintFinding> detect_fingerprints(std::span<const CrawlTrace> traces,
                                                    const SuffixSet& suffixes,
                                                    const FingerprintOptions& options);

struct FingerprintGroupStats {
  std::size_t sites_total = 0;
  std::size_t sites_flagged = 0;
  double fraction = 0;
  std::size_t distinct_scripts = 0;  // by (URL, kind)
  std::size_t distinct_domains = 0;
};

struct FingerprintKindStats {
  std::size_t scripts = 0;  // distinct URLs
  std::size_t sites = 0;
  std::size_t domains = 0;
};

struct FingerprintSummary {
  std::map<Leaning, FingerprintGroupStats> by_leaning;
  FingerprintGroupStats overall;
  std::map<FingerprintKind, FingerprintKindStats> by_kind;
};

FingerprintSummary fingerprint_summary(std::span<const FingerprintFinding> findings,
                                       const LabelSet& labels);

}  // namespace tracklens
