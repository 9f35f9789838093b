#include "csync.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "parallel.hpp"
#include "strings.hpp"
#include "url.hpp"

namespace tracklens {

namespace {

constexpr std::int64_t kDayMs = 86'400'000;

using IdKey = std::tuple<std::string, std::string, std::string>;  // token, origin, cookie name

struct IdObservation {
  std::set<std::string> crawl_ids;
  std::int64_t first_seen = 0;
};

using ObservationMap = std::map<IdKey, IdObservation>;

std::optional<std::string> domain_of(const SuffixSet& suffixes, std::string_view url_or_host) {
  return suffixes.try_registrable_domain(url_or_host);
}

std::string site_domain_of(const SuffixSet& suffixes, const CrawlTrace& t) {
  if (auto d = suffixes.try_registrable_domain(t.site.site_id)) return *d;
  return t.site.site_id;
}

// Distinct tokens of the raw text and of its percent-decoded form.
std::set<std::string> text_tokens(std::string_view text, std::size_t min_len, std::size_t max_len) {
  std::set<std::string> out;
  auto take = [&](std::string_view s) {
    for (auto tok : split_tokens(s))
      if (tok.size() >= min_len && tok.size() <= max_len) out.emplace(tok);
  };
  take(text);
  if (text.find('%') != std::string_view::npos) take(percent_decode(text));
  return out;
}

void observe_cookies(const CrawlTrace& t, const SuffixSet& suffixes, const CsyncOptions& options,
                     ObservationMap& out) {
  if (t.crawl_mode != CrawlMode::kStateful) return;
  for (const auto& c : t.cookies) {
    if (is_malformed(c) || !c.expiry) continue;
    if (*c.expiry - c.set_time <= options.min_cookie_days * kDayMs) continue;
    std::string setter = to_lower_ascii(trim(c.setter_domain));
    while (!setter.empty() && setter.front() == '.') setter.erase(0, 1);
    const std::string origin = domain_of(suffixes, setter).value_or(setter);
    for (const auto& tok : text_tokens(c.value, options.min_id_len, options.max_id_len)) {
      auto [it, inserted] = out.try_emplace(IdKey{tok, origin, c.name});
      IdObservation& obs = it->second;
      const std::string crawl = c.crawl_id.empty() ? t.crawl_id : c.crawl_id;
      obs.crawl_ids.insert(crawl);
      obs.first_seen = inserted ? c.set_time : std::min(obs.first_seen, c.set_time);
    }
  }
}

std::vector<UserId> eligible_ids(const ObservationMap& obs, std::size_t min_crawls) {
  std::vector<UserId> out;
  for (const auto& [key, o] : obs) {
    if (o.crawl_ids.size() < min_crawls) continue;
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), o.first_seen, o.crawl_ids});
  }
  return out;
}

// Canonical owner per token: earliest first_seen, then origin, then name.
std::unordered_map<std::string, const UserId*> canonical_ids(std::span<const UserId> ids) {
  std::unordered_map<std::string, const UserId*> out;
  for (const auto& id : ids) {
    auto [it, inserted] = out.try_emplace(id.token, &id);
    if (inserted) continue;
    const UserId* cur = it->second;
    if (std::tie(id.first_seen, id.origin_domain, id.cookie_name) <
        std::tie(cur->first_seen, cur->origin_domain, cur->cookie_name))
      it->second = &id;
  }
  return out;
}

// A match before ID ownership is known. Token length bounds are implied by
// the lookup set.
struct RawMatch {
  SyncEvent event;  // token set, ownership fields empty
  std::string site_domain;
};

template <typename HasToken>
void scan_trace(const CrawlTrace& t, const SuffixSet& suffixes, HasToken&& has_token,
                std::size_t min_len, std::size_t max_len, std::vector<RawMatch>& out) {
  const std::string site_domain = site_domain_of(suffixes, t);
  std::unordered_set<std::string> redirect_targets;
  for (const auto& e : t.events)
    if (e.kind == EventKind::kRedirect && e.location) redirect_targets.insert(*e.location);

  auto emit = [&](const HttpEvent& e, SyncChannel channel, const std::string& url_text,
                  const std::string& sender, const std::string& receiver, bool inferred) {
    if (sender == receiver) return;
    for (const auto& tok : text_tokens(url_text, min_len, max_len)) {
      if (!has_token(tok)) continue;
      RawMatch m;
      m.event.token = tok;
      m.event.sender = sender;
      m.event.receiver = receiver;
      m.event.channel = channel;
      m.event.sender_inferred = inferred;
      m.event.evidence_event_id = e.event_id;
      m.event.evidence_url = url_text;
      m.event.visit_id = t.visit_id;
      m.event.visit_site = t.site.site_id;
      m.site_domain = site_domain;
      out.push_back(std::move(m));
    }
  };

  for (const auto& e : t.events) {
    if (e.kind == EventKind::kRequest) {
      const auto receiver = domain_of(suffixes, e.url);
      if (!receiver) continue;
      const auto ref = effective_referrer(e);
      const auto ref_domain = ref ? domain_of(suffixes, *ref) : std::nullopt;
      if (!redirect_targets.count(e.url)) {
        if (ref_domain) emit(e, SyncChannel::kRequestUrl, e.url, *ref_domain, *receiver, false);
        else emit(e, SyncChannel::kRequestUrl, e.url, site_domain, *receiver, true);
      }
      if (ref_domain)
        emit(e, SyncChannel::kReferrer, std::string(*ref), *ref_domain, *receiver, false);
    } else if (e.kind == EventKind::kRedirect && e.location) {
      const auto sender = domain_of(suffixes, e.url);
      const auto receiver = domain_of(suffixes, *e.location);
      if (!sender || !receiver) continue;
      emit(e, SyncChannel::kRedirectLocation, *e.location, *sender, *receiver, false);
    }
  }
}

// Attaches ownership and applies the own-origin rule. False means drop.
bool resolve(RawMatch& m, const UserId& owner) {
  const bool back_to_origin = m.event.receiver == owner.origin_domain &&
                              (m.event.sender_inferred || m.event.sender == m.site_domain);
  if (back_to_origin) return false;
  m.event.origin_domain = owner.origin_domain;
  m.event.cookie_name = owner.cookie_name;
  return true;
}

bool event_less(const SyncEvent& a, const SyncEvent& b) {
  return std::tie(a.visit_site, a.visit_id, a.evidence_event_id, a.channel, a.token) <
         std::tie(b.visit_site, b.visit_id, b.evidence_event_id, b.channel, b.token);
}

bool is_fp(const SuffixSet& suffixes, const std::string& domain, const std::string& visit_site) {
  const auto site = suffixes.try_registrable_domain(visit_site);
  return domain == site.value_or(visit_site);
}

}  // namespace

bool is_token_delimiter(char c) {
  switch (c) {
    case '=': case '&': case ';': case ':': case ',': case '?': case '/':
      return true;
    default:
      return std::isspace(static_cast<unsigned char>(c)) != 0;
  }
}

std::vector<std::string_view> split_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || is_token_delimiter(text[i])) {
      if (i > start) out.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::vector<UserId> extract_ids(std::span<const CrawlTrace> traces, const SuffixSet& suffixes,
                                const CsyncOptions& options) {
  ObservationMap obs;
  for (const auto& t : traces) observe_cookies(t, suffixes, options, obs);
  return eligible_ids(obs, options.min_crawls);
}

std::string_view to_string(SyncChannel c) {
  switch (c) {
    case SyncChannel::kRequestUrl: return "request_url";
    case SyncChannel::kReferrer: return "referrer";
    case SyncChannel::kRedirectLocation: return "redirect_location";
  }
  return "?";
}

std::vector<SyncEvent> detect_syncs(std::span<const CrawlTrace> traces, std::span<const UserId> ids,
                                    const SuffixSet& suffixes) {
  const auto owners = canonical_ids(ids);
  if (owners.empty()) return {};
  std::size_t min_len = SIZE_MAX, max_len = 0;
  for (const auto& [tok, _] : owners) {
    min_len = std::min(min_len, tok.size());
    max_len = std::max(max_len, tok.size());
  }
  std::vector<RawMatch> raw;
  for (const auto& t : traces)
    scan_trace(t, suffixes, [&](const std::string& tok) { return owners.count(tok) > 0; }, min_len,
               max_len, raw);
  std::vector<SyncEvent> out;
  for (auto& m : raw)
    if (resolve(m, *owners.at(m.event.token))) out.push_back(std::move(m.event));
  std::sort(out.begin(), out.end(), event_less);
  return out;
}

bool event_is_tp_tp(const SyncEvent& e, const SuffixSet& suffixes) {
  return !is_fp(suffixes, e.sender, e.visit_site) && !is_fp(suffixes, e.receiver, e.visit_site);
}

bool event_is_fp_tp(const SyncEvent& e, const SuffixSet& suffixes) {
  return is_fp(suffixes, e.sender, e.visit_site) != is_fp(suffixes, e.receiver, e.visit_site);
}

std::vector<std::pair<std::string, std::string>> enumerate_pairs(const LabelSet& labels, Leaning a,
                                                                 Leaning b) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto first = labels.sites(a);
  if (a == b) {
    for (std::size_t i = 0; i < first.size(); ++i)
      for (std::size_t j = i + 1; j < first.size(); ++j) out.emplace_back(first[i], first[j]);
    return out;
  }
  const auto second = labels.sites(b);
  for (const auto& x : first)
    for (const auto& y : second)
      if (x != y) out.emplace_back(x, y);
  return out;
}

std::string GroupPair::name() const {
  return std::string(leaning_title(first)) + "-" + std::string(leaning_title(second));
}

const std::vector<GroupPair>& table_group_pairs() {
  static const std::vector<GroupPair> rows = {
      {Leaning::kRight, Leaning::kRight}, {Leaning::kLeft, Leaning::kLeft},
      {Leaning::kCentre, Leaning::kCentre}, {Leaning::kRight, Leaning::kLeft},
      {Leaning::kRight, Leaning::kCentre}, {Leaning::kLeft, Leaning::kCentre}};
  return rows;
}

void PairMetricsBuilder::add_website_pair(std::span<const SyncEvent> events) {
  ++metrics_.website_pair_count;
  for (const auto& e : events) {
    ++metrics_.sync_count;
    tokens_.insert(e.token);
    auto key = std::minmax(e.sender, e.receiver);
    if (event_is_tp_tp(e, *suffixes_)) {
      ++metrics_.tp_tp_syncs;
      tp_tp_pairs_.emplace(key.first, key.second);
    } else if (event_is_fp_tp(e, *suffixes_)) {
      ++metrics_.fp_tp_syncs;
      fp_tp_pairs_.emplace(key.first, key.second);
    }
  }
}

void PairMetricsBuilder::merge(const PairMetricsBuilder& other) {
  metrics_.website_pair_count += other.metrics_.website_pair_count;
  metrics_.sync_count += other.metrics_.sync_count;
  metrics_.tp_tp_syncs += other.metrics_.tp_tp_syncs;
  metrics_.fp_tp_syncs += other.metrics_.fp_tp_syncs;
  tokens_.insert(other.tokens_.begin(), other.tokens_.end());
  tp_tp_pairs_.insert(other.tp_tp_pairs_.begin(), other.tp_tp_pairs_.end());
  fp_tp_pairs_.insert(other.fp_tp_pairs_.begin(), other.fp_tp_pairs_.end());
}

PairMetrics PairMetricsBuilder::finish() const {
  PairMetrics m = metrics_;
  m.unique_ids = tokens_.size();
  m.tp_tp_domain_pairs = tp_tp_pairs_.size();
  m.fp_tp_domain_pairs = fp_tp_pairs_.size();
  auto ratio = [](std::size_t num, std::size_t den, bool& zero) {
    zero = den == 0;
    return zero ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.avg_syncs_per_unique_id = ratio(m.sync_count, m.unique_ids, m.zero_unique_ids);
  m.avg_syncs_per_tp_tp_pair = ratio(m.tp_tp_syncs, m.tp_tp_domain_pairs, m.zero_tp_tp_pairs);
  m.avg_syncs_per_fp_tp_pair = ratio(m.fp_tp_syncs, m.fp_tp_domain_pairs, m.zero_fp_tp_pairs);
  return m;
}

PairMetrics pair_metrics(std::string group_pair, std::span<const SyncEvent> events,
                         std::size_t website_pair_count, const SuffixSet& suffixes) {
  PairMetricsBuilder builder(std::move(group_pair), suffixes);
  builder.add_website_pair(events);
  PairMetrics m = builder.finish();
  m.website_pair_count = website_pair_count;
  return m;
}

CsyncSummary csync_summary(std::span<const SyncEvent> events, std::span<const CrawlTrace> traces,
                           const LabelSet& labels, const SuffixSet& suffixes, std::size_t top_k) {
  CsyncSummary s;
  std::set<std::string> fp_all, tp_all;
  for (const auto& t : traces) {
    const std::string site = site_domain_of(suffixes, t);
    fp_all.insert(site);
    auto note = [&](std::string_view url_or_host) {
      if (auto d = suffixes.try_registrable_domain(url_or_host); d && *d != site) tp_all.insert(*d);
    };
    for (const auto& e : t.events) {
      note(e.url);
      if (auto ref = effective_referrer(e)) note(*ref);
      if (e.location) note(*e.location);
    }
    for (const auto& c : t.cookies) note(c.setter_domain);
  }

  std::set<std::string> fp_sync, tp_sync;
  std::map<std::string, TopSyncTp> tps;
  std::map<std::string, std::map<Leaning, std::set<std::string>>> tp_sites;
  std::map<std::string, std::set<std::string>> ids_by_domain;
  std::map<std::string, std::set<std::string>> receivers_by_token;
  for (const auto& e : events) {
    const bool tp_tp = event_is_tp_tp(e, suffixes);
    const auto leaning = labels.leaning_of(e.visit_site);
    for (const std::string* endpoint : {&e.sender, &e.receiver}) {
      if (is_fp(suffixes, *endpoint, e.visit_site)) {
        fp_sync.insert(*endpoint);
        continue;
      }
      tp_sync.insert(*endpoint);
      ids_by_domain[*endpoint].insert(e.token);
      TopSyncTp& row = tps[*endpoint];
      row.domain = *endpoint;
      ++row.total_syncs;
      if (tp_tp) ++row.tp_tp_syncs;
      else ++row.fp_tp_syncs;
      if (leaning) tp_sites[*endpoint][*leaning].insert(e.visit_site);
    }
    if (!is_fp(suffixes, e.receiver, e.visit_site)) receivers_by_token[e.token].insert(e.receiver);
    if (!s.shortest_token || e.token.size() < *s.shortest_token) s.shortest_token = e.token.size();
  }
  // Endpoints of detected syncs count as observed even if the corpus scan
  // above resolved them differently.
  fp_all.insert(fp_sync.begin(), fp_sync.end());
  tp_all.insert(tp_sync.begin(), tp_sync.end());

  s.fp_domains = fp_all.size();
  s.fp_syncing = fp_sync.size();
  s.fp_fraction_syncing = fp_all.empty() ? 0.0 : static_cast<double>(fp_sync.size()) / static_cast<double>(fp_all.size());
  s.tp_domains = tp_all.size();
  s.tp_syncing = tp_sync.size();
  s.tp_fraction_syncing = tp_all.empty() ? 0.0 : static_cast<double>(tp_sync.size()) / static_cast<double>(tp_all.size());

  for (auto& [domain, row] : tps) {
    for (Leaning l : kAllLeanings) {
      const double n = static_cast<double>(labels.sites(l).size());
      const auto it = tp_sites[domain].find(l);
      const double k = it == tp_sites[domain].end() ? 0.0 : static_cast<double>(it->second.size());
      row.site_fraction[l] = n > 0 ? k / n : 0.0;
    }
    s.top_tps.push_back(row);
  }
  std::sort(s.top_tps.begin(), s.top_tps.end(), [](const TopSyncTp& a, const TopSyncTp& b) {
    if (a.total_syncs != b.total_syncs) return a.total_syncs > b.total_syncs;
    return a.domain < b.domain;
  });
  if (s.top_tps.size() > top_k) s.top_tps.resize(top_k);

  for (const auto& [domain, ids] : ids_by_domain)
    if (ids.size() > s.max_ids_per_domain.second) s.max_ids_per_domain = {domain, ids.size()};
  for (const auto& [token, receivers] : receivers_by_token)
    if (receivers.size() > s.max_domains_per_id.second) s.max_domains_per_id = {token, receivers.size()};
  return s;
}

CsyncAnalysis analyze_csync(std::span<const CrawlTrace> traces, const LabelSet& labels,
                            const SuffixSet& suffixes, const CsyncOptions& options, unsigned jobs) {
  std::vector<CrawlTrace> stateful;
  for (const auto& t : traces)
    if (t.crawl_mode == CrawlMode::kStateful) stateful.push_back(t);

  CsyncAnalysis out;
  out.ids = extract_ids(stateful, suffixes, options);
  out.events = detect_syncs(stateful, out.ids, suffixes);
  out.summary = csync_summary(out.events, stateful, labels, suffixes);

  // Per-site precomputation for the website-pair analysis: cookie
  // observations, and matches against every token any site could own.
  struct SiteData {
    ObservationMap observations;
    std::vector<RawMatch> matches;
  };
  std::map<std::string, SiteData> sites;
  for (const auto& t : stateful) observe_cookies(t, suffixes, options, sites[t.site.site_id].observations);
  std::unordered_set<std::string> pool;
  for (const auto& [site, data] : sites)
    for (const auto& [key, obs] : data.observations) pool.insert(std::get<0>(key));
  for (const auto& t : stateful)
    scan_trace(t, suffixes, [&](const std::string& tok) { return pool.count(tok) > 0; },
               options.min_id_len, options.max_id_len, sites[t.site.site_id].matches);

  static const SiteData kEmpty;
  auto site_data = [&](const std::string& site) -> const SiteData& {
    const auto it = sites.find(site);
    return it == sites.end() ? kEmpty : it->second;
  };

  for (const GroupPair& gp : table_group_pairs()) {
    const auto pairs = enumerate_pairs(labels, gp.first, gp.second);
    const unsigned workers = worker_count(pairs.size(), jobs);
    std::vector<PairMetricsBuilder> builders(workers, PairMetricsBuilder(gp.name(), suffixes));
    std::vector<double> per_pair(pairs.size(), 0.0);
    parallel_for(pairs.size(), workers, [&](std::size_t i, unsigned w) {
      const SiteData& a = site_data(pairs[i].first);
      const SiteData& b = site_data(pairs[i].second);
      ObservationMap merged = a.observations;
      for (const auto& [key, obs] : b.observations) {
        auto [it, inserted] = merged.try_emplace(key, obs);
        if (inserted) continue;
        it->second.crawl_ids.insert(obs.crawl_ids.begin(), obs.crawl_ids.end());
        it->second.first_seen = std::min(it->second.first_seen, obs.first_seen);
      }
      const auto ids = eligible_ids(merged, options.min_crawls);
      const auto owners = canonical_ids(ids);
      std::vector<SyncEvent> events;
      for (const SiteData* d : {&a, &b}) {
        for (const RawMatch& m : d->matches) {
          const auto owner = owners.find(m.event.token);
          if (owner == owners.end()) continue;
          RawMatch copy = m;
          if (resolve(copy, *owner->second)) events.push_back(std::move(copy.event));
        }
      }
      builders[w].add_website_pair(events);
      std::set<std::string> tokens;
      for (const auto& e : events) tokens.insert(e.token);
      per_pair[i] = tokens.empty() ? 0.0 : static_cast<double>(events.size()) / static_cast<double>(tokens.size());
    });
    for (unsigned w = 1; w < workers; ++w) builders[0].merge(builders[w]);
    out.table.push_back(builders[0].finish());
    out.per_pair_avg[gp.name()] = std::move(per_pair);
  }
  return out;
}

Json to_json(const SyncEvent& e) {
  return Json{{"token", e.token},
              {"origin_domain", e.origin_domain},
              {"cookie_name", e.cookie_name},
              {"sender", e.sender},
              {"receiver", e.receiver},
              {"channel", to_string(e.channel)},
              {"sender_inferred", e.sender_inferred},
              {"evidence_event_id", e.evidence_event_id},
              {"evidence_url", e.evidence_url},
              {"visit_id", e.visit_id},
              {"visit_site", e.visit_site}};
}

}  // namespace tracklens
