#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "domain.hpp"
#include "trace.hpp"

namespace tracklens {

struct CsyncOptions {
  std::size_t min_id_len = 11;
  std::size_t max_id_len = 128;
  std::int64_t min_cookie_days = 30;  // lifetime must exceed this
  std::size_t min_crawls = 2;         // distinct stateful crawls a token must recur in
};

// Separators for cookie values and for URL boundary checks. '-', '_' and '.'
// are part of tokens so UUID-style IDs survive intact.
bool is_token_delimiter(char c);

// Maximal delimiter-free runs, in order of appearance.
std::vector<std::string_view> split_tokens(std::string_view text);

struct UserId {
  std::string token;
  std::string origin_domain;  // registrable domain of the setting cookie
  std::string cookie_name;
  std::int64_t first_seen = 0;
  std::set<std::string> crawl_ids;

  bool operator==(const UserId&) const = default;
};

// IDs from persistent cookies of stateful traces: not malformed, lifetime
// above min_cookie_days, token length within [min_id_len, max_id_len], seen
// in at least min_crawls crawls. Values are split raw and once
// percent-decoded. Sorted by (token, origin, cookie name).
std::vector<UserId> extract_ids(std::span<const CrawlTrace> traces, const SuffixSet& suffixes,
                                const CsyncOptions& options);

enum class SyncChannel { kRequestUrl, kReferrer, kRedirectLocation };
std::string_view to_string(SyncChannel c);

struct SyncEvent {
  // The ID as owned by its origin. When several cookies carry the same token
  // the earliest-seen one (then origin, then name) stands for it.
  std::string token;
  std::string origin_domain;
  std::string cookie_name;

  std::string sender;
  std::string receiver;
  SyncChannel channel = SyncChannel::kRequestUrl;
  bool sender_inferred = false;  // no referrer: the visited site is the sender
  std::string evidence_event_id;
  std::string evidence_url;
  std::string visit_id;
  std::string visit_site;

  bool operator==(const SyncEvent&) const = default;
};

// Scans request URLs, referrers and redirect locations for delimiter-bounded
// ID tokens (raw and once percent-decoded). A request to a URL that some
// redirect in the same visit pointed at is the same transfer as that
// redirect and is not reported again. Events where sender equals receiver,
// and events returning an ID to its own origin from the visited page, are
// dropped. Output sorted by (visit_site, visit_id, evidence event, channel,
// token).
std::vector<SyncEvent> detect_syncs(std::span<const CrawlTrace> traces, std::span<const UserId> ids,
                                    const SuffixSet& suffixes);

bool event_is_tp_tp(const SyncEvent& e, const SuffixSet& suffixes);
bool event_is_fp_tp(const SyncEvent& e, const SuffixSet& suffixes);

// Website pairs of two leaning groups; (w1, w2) and (w2, w1) count once.
std::vector<std::pair<std::string, std::string>> enumerate_pairs(const LabelSet& labels, Leaning a,
                                                                 Leaning b);

struct GroupPair {
  Leaning first;
  Leaning second;
  std::string name() const;  // "Left-Centre"
};

// Table rows in presentation order: RR, LL, CC, RL, RC, LC.
const std::vector<GroupPair>& table_group_pairs();

struct PairMetrics {
  std::string group_pair;
  std::size_t website_pair_count = 0;
  std::size_t sync_count = 0;
  std::size_t unique_ids = 0;
  double avg_syncs_per_unique_id = 0;
  std::size_t tp_tp_syncs = 0;
  std::size_t tp_tp_domain_pairs = 0;  // unordered
  double avg_syncs_per_tp_tp_pair = 0;
  std::size_t fp_tp_syncs = 0;
  std::size_t fp_tp_domain_pairs = 0;  // unordered
  double avg_syncs_per_fp_tp_pair = 0;
  // Set when a denominator was zero and the average was reported as 0.
  bool zero_unique_ids = false;
  bool zero_tp_tp_pairs = false;
  bool zero_fp_tp_pairs = false;
};

// Accumulates sync events of many website pairs into one table row.
class PairMetricsBuilder {
 public:
  PairMetricsBuilder(std::string group_pair, const SuffixSet& suffixes)
      : suffixes_(&suffixes) {
    metrics_.group_pair = std::move(group_pair);
  }
  void add_website_pair(std::span<const SyncEvent> events);
  void merge(const PairMetricsBuilder& other);
  PairMetrics finish() const;

 private:
  const SuffixSet* suffixes_;
  PairMetrics metrics_;
  std::set<std::string> tokens_;
  std::set<std::pair<std::string, std::string>> tp_tp_pairs_;
  std::set<std::pair<std::string, std::string>> fp_tp_pairs_;
};

// Single-shot form over already aggregated events.
PairMetrics pair_metrics(std::string group_pair, std::span<const SyncEvent> events,
                         std::size_t website_pair_count, const SuffixSet& suffixes);

struct TopSyncTp {
  std::string domain;
  std::size_t total_syncs = 0;
  std::size_t tp_tp_syncs = 0;
  std::size_t fp_tp_syncs = 0;
  std::map<Leaning, double> site_fraction;  // share of the group's sites where it syncs
};

struct CsyncSummary {
  std::size_t fp_domains = 0;
  std::size_t fp_syncing = 0;
  double fp_fraction_syncing = 0;
  std::size_t tp_domains = 0;
  std::size_t tp_syncing = 0;
  double tp_fraction_syncing = 0;
  std::vector<TopSyncTp> top_tps;
  std::pair<std::string, std::size_t> max_ids_per_domain;
  std::pair<std::string, std::size_t> max_domains_per_id;  // token, distinct receivers
  std::optional<std::size_t> shortest_token;
};

CsyncSummary csync_summary(std::span<const SyncEvent> events, std::span<const CrawlTrace> traces,
                           const LabelSet& labels, const SuffixSet& suffixes,
                           std::size_t top_k = 10);

struct CsyncAnalysis {
  std::vector<UserId> ids;
  std::vector<SyncEvent> events;
  std::vector<PairMetrics> table;  // table_group_pairs() order
  // Per website pair: syncs per unique ID (0 when the pair has none).
  std::map<std::string, std::vector<double>> per_pair_avg;
  CsyncSummary summary;
};

// Corpus-wide detection plus the per-website-pair analysis. Only stateful
// traces take part. For each pair the IDs are re-derived from the two
// sites' own cookies before matching, as if the pair had been analyzed in
// isolation.
CsyncAnalysis analyze_csync(std::span<const CrawlTrace> traces, const LabelSet& labels,
                            const SuffixSet& suffixes, const CsyncOptions& options,
                            unsigned jobs = 1);

Json to_json(const SyncEvent& e);

}  // namespace tracklens
