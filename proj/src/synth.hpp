#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csync.hpp"
#include "fingerprint.hpp"
#include "image_header.hpp"
#include "trace.hpp"

namespace tracklens {

// Plans name sites by site_id. Apart from cookies (which may target the
// mobile roster entry) they apply to the desktop traces, once per stateful
// crawl. Domains in plans must be registrable domains.
struct CookiePlan {
  std::string site;
  Platform platform = Platform::kDesktop;
  std::size_t first_party = 0;
  std::map<std::string, std::size_t> third_party;  // domain -> cookies
};

struct IdPlan {
  std::string name;  // referenced by syncs
  std::string origin;
  std::string cookie_name;
  std::size_t token_length = 22;
  std::vector<std::string> carriers;  // sites whose visits carry the cookie
};

struct SyncPlan {
  std::string site;
  std::string id;
  SyncChannel channel = SyncChannel::kRequestUrl;
  std::optional<std::string> sender;  // absent: no referrer, request_url only
  std::string receiver;
  bool percent_encoded = false;
};

struct FingerprintPlan {
  std::string site;
  std::string script_domain;
  std::vector<FingerprintKind> kinds;  // all performed by one script
};

struct PixelPlan {
  std::string site;
  std::string domain;
  std::size_t count = 0;
  ImageFormat format = ImageFormat::kGif;
};

struct ImagePlan {
  std::string site;
  std::size_t count = 0;  // ordinary images, all larger than 1x1
};

struct PlantSpec {
  std::uint64_t rng_seed = 0;
  int stateful_crawls = 3;
  std::size_t background_requests = 0;  // per visit
  bool decoys = false;
  std::vector<SiteLabel> sites;
  std::vector<CookiePlan> cookies;
  std::vector<IdPlan> ids;
  std::vector<SyncPlan> syncs;
  std::vector<FingerprintPlan> fingerprints;
  std::vector<PixelPlan> pixels;
  std::vector<ImagePlan> images;
};

PlantSpec plant_spec_from_json(const Json& j);
Json to_json(const PlantSpec& spec);

// 20 desktop sites (a few also crawled on mobile), 3 stateful crawls,
// decoys on.
PlantSpec default_spec(std::uint64_t seed = 7);

struct TruthVisitCookies {
  std::string visit_id;
  std::string site_id;
  Platform platform = Platform::kDesktop;
  std::size_t cookie_count = 0;
  std::size_t tp_count = 0;
  bool operator==(const TruthVisitCookies&) const = default;
};

struct TruthFingerprint {
  std::string visit_id;
  std::string site_id;
  std::string script_url;
  FingerprintKind kind = FingerprintKind::kCanvas;
  auto operator<=>(const TruthFingerprint&) const = default;
};

struct TruthPixel {
  std::string visit_id;
  std::string site_id;
  std::string event_id;
  std::string image_url;
  std::string setter_domain;
  auto operator<=>(const TruthPixel&) const = default;
};

struct GroundTruth {
  std::vector<UserId> ids;          // extract_ids order
  std::vector<SyncEvent> syncs;     // detect_syncs order
  std::vector<TruthFingerprint> fingerprints;
  std::vector<TruthPixel> pixels;
  std::size_t image_responses = 0;
  std::size_t undecodable = 0;
  std::vector<TruthVisitCookies> cookies;
  std::map<std::string, std::size_t> decoys;  // kind -> planted count
};

Json to_json(const GroundTruth& truth);

struct SynthOutput {
  std::vector<CrawlTrace> traces;
  GroundTruth truth;
};

// Deterministic in spec.rng_seed. Throws kInvalidArgument naming the plan
// entry when the spec is inconsistent.
SynthOutput generate(const PlantSpec& spec);

// Minimal image of the given format and size, padded to at least
// `min_bytes` with a format-appropriate comment block. kUnknown yields an
// ICO-like blob.
std::vector<std::uint8_t> synth_image(ImageFormat format, std::uint32_t width, std::uint32_t height,
                                      std::size_t min_bytes = 0);

std::string labels_csv(const std::vector<SiteLabel>& sites);

}  // namespace tracklens
