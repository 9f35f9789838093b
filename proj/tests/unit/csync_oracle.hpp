#pragma once

// Brute-force sync detection and the random corpora it is checked against.

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "csync.hpp"
#include "support.hpp"

namespace tltest {

inline bool oracle_delim(char c) {
  static const std::string kDelims = "=&;:,?/ \t\n\r\f\v";
  return kDelims.find(c) != std::string::npos;
}

inline std::string oracle_decode(const std::string& s) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && hex(s[i + 1]) >= 0 && hex(s[i + 2]) >= 0) {
      out += static_cast<char>(hex(s[i + 1]) * 16 + hex(s[i + 2]));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

// Every occurrence of `token` in `text`, accepted when both neighbours are
// delimiters or string ends.
inline bool bounded_occurrence(const std::string& text, const std::string& token) {
  for (std::size_t at = text.find(token); at != std::string::npos; at = text.find(token, at + 1)) {
    const bool left = at == 0 || oracle_delim(text[at - 1]);
    const bool right = at + token.size() == text.size() || oracle_delim(text[at + token.size()]);
    if (left && right) return true;
  }
  return false;
}

inline bool oracle_contains(const std::string& text, const std::string& token) {
  if (bounded_occurrence(text, token)) return true;
  return text.find('%') != std::string::npos && bounded_occurrence(oracle_decode(text), token);
}

inline std::optional<std::string> oracle_referrer(const HttpEvent& e) {
  if (e.referrer) return e.referrer;
  for (const auto& [k, v] : e.headers)
    if (to_lower_ascii(k) == "referer") return v;
  return std::nullopt;
}

inline bool oracle_event_less(const SyncEvent& a, const SyncEvent& b) {
  return std::tie(a.visit_site, a.visit_id, a.evidence_event_id, a.channel, a.token) <
         std::tie(b.visit_site, b.visit_id, b.evidence_event_id, b.channel, b.token);
}

// All events x all tokens.
inline std::vector<SyncEvent> brute_force_syncs(const std::vector<CrawlTrace>& traces, const std::vector<UserId>& ids,
                                                const SuffixSet& suffixes) {
  std::map<std::string, const UserId*> owner;
  for (const auto& id : ids) {
    auto& o = owner[id.token];
    if (!o || std::tie(id.first_seen, id.origin_domain, id.cookie_name) <
                  std::tie(o->first_seen, o->origin_domain, o->cookie_name))
      o = &id;
  }
  std::vector<SyncEvent> out;
  for (const auto& t : traces) {
    const std::string site = suffixes.try_registrable_domain(t.site.site_id).value_or(t.site.site_id);
    std::set<std::string> redirect_targets;
    for (const auto& e : t.events)
      if (e.kind == EventKind::kRedirect && e.location) redirect_targets.insert(*e.location);

    auto scan = [&](const HttpEvent& e, SyncChannel ch, const std::string& text, const std::string& sender,
                    const std::string& receiver, bool inferred) {
      if (sender == receiver) return;
      for (const auto& [token, id] : owner) {
        if (!oracle_contains(text, token)) continue;
        if (receiver == id->origin_domain && (inferred || sender == site)) continue;
        SyncEvent s;
        s.token = token;
        s.origin_domain = id->origin_domain;
        s.cookie_name = id->cookie_name;
        s.sender = sender;
        s.receiver = receiver;
        s.channel = ch;
        s.sender_inferred = inferred;
        s.evidence_event_id = e.event_id;
        s.evidence_url = text;
        s.visit_id = t.visit_id;
        s.visit_site = t.site.site_id;
        out.push_back(std::move(s));
      }
    };

    for (const auto& e : t.events) {
      if (e.kind == EventKind::kRequest) {
        const auto receiver = suffixes.try_registrable_domain(e.url);
        if (!receiver) continue;
        const auto ref = oracle_referrer(e);
        const auto ref_domain = ref ? suffixes.try_registrable_domain(*ref) : std::nullopt;
        if (!redirect_targets.count(e.url))
          scan(e, SyncChannel::kRequestUrl, e.url, ref_domain.value_or(site), *receiver, !ref_domain);
        if (ref_domain) scan(e, SyncChannel::kReferrer, *ref, *ref_domain, *receiver, false);
      } else if (e.kind == EventKind::kRedirect && e.location) {
        const auto sender = suffixes.try_registrable_domain(e.url);
        const auto receiver = suffixes.try_registrable_domain(*e.location);
        if (sender && receiver) scan(e, SyncChannel::kRedirectLocation, *e.location, *sender, *receiver, false);
      }
    }
  }
  std::sort(out.begin(), out.end(), oracle_event_less);
  return out;
}

struct RandomCorpus {
  std::vector<CrawlTrace> traces;
  std::vector<UserId> ids;
  std::size_t events = 0;
};

// Random traces whose URLs embed ID tokens bare, glued to neighbouring
// characters, percent-encoded and inside nested URLs, plus redirects with
// follow-up requests.
inline RandomCorpus random_corpus(std::uint64_t seed, std::size_t n_events, std::size_t n_tokens) {
  std::mt19937_64 rng(seed);
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto chance = [&](int pct) { return static_cast<int>(rng() % 100) < pct; };

  std::vector<std::string> domains;
  const char* suffixes[] = {"com", "net", "io", "co.uk", "com.au"};
  for (int i = 0; i < 40; ++i) domains.push_back("trk" + std::to_string(i) + "." + suffixes[i % 5]);
  std::vector<std::string> sites;
  for (int i = 0; i < 12; ++i) sites.push_back("site" + std::to_string(i) + "." + (i % 2 ? "org" : "co.uk"));
  std::vector<std::string> all_domains = domains;
  all_domains.insert(all_domains.end(), sites.begin(), sites.end());

  RandomCorpus c;
  static const std::string kAlphabet = "0123456789abcdef-_.";
  std::set<std::string> used, distinct;
  while (distinct.size() < n_tokens) {
    std::string tok;
    if (!c.ids.empty() && chance(10)) {
      tok = c.ids[below(c.ids.size())].token + kAlphabet[below(16)];  // extends an existing token
    } else {
      const std::size_t len = 11 + below(30);
      for (std::size_t i = 0; i < len; ++i) tok += kAlphabet[below(kAlphabet.size())];
    }
    UserId id;
    id.token = tok;
    id.origin_domain = all_domains[below(all_domains.size())];
    id.cookie_name = "c" + std::to_string(below(5));
    id.first_seen = static_cast<std::int64_t>(below(1000));
    id.crawl_ids = {"stateful-1", "stateful-2"};
    if (!used.insert(tok + "|" + id.origin_domain + "|" + id.cookie_name).second) continue;
    c.ids.push_back(id);
    distinct.insert(tok);
    if (chance(5)) {  // same token owned elsewhere too
      UserId twin = id;
      twin.origin_domain = all_domains[below(all_domains.size())];
      twin.first_seen = static_cast<std::int64_t>(below(1000));
      if (used.insert(twin.token + "|" + twin.origin_domain + "|" + twin.cookie_name).second) c.ids.push_back(twin);
    }
  }

  auto encode_all = [](const std::string& s) {
    static const char* kHex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char ch : s) {
      out += '%';
      out += kHex[ch >> 4];
      out += kHex[ch & 15];
    }
    return out;
  };
  auto value = [&]() -> std::string {
    const std::string& tok = c.ids[below(c.ids.size())].token;
    switch (below(8)) {
      case 0: return tok;
      case 1: return "x" + tok;
      case 2: return tok + "-z";
      case 3: return encode_all(tok);
      case 4: return "https%3A%2F%2Fcm." + domains[below(domains.size())] + "%2Fset%3Fuid%3D" + tok;
      case 5: return tok.substr(0, tok.size() - 1);
      case 6: return tok + "%26v%3D1";
      default: return std::to_string(rng() % 100000);
    }
  };
  auto host = [&](const std::string& d) {
    static const char* kSub[] = {"www", "sync", "px", "cdn", "cm"};
    return std::string(kSub[rng() % 5]) + "." + d;
  };
  auto url = [&](const std::string& d) {
    std::string u = "https://" + host(d) + "/p" + std::to_string(below(50));
    if (chance(15)) u += "/" + value();
    const std::size_t params = below(4);
    static const char kSep[] = {'&', ';', ','};
    for (std::size_t i = 0; i < params; ++i) {
      u += i == 0 ? '?' : kSep[below(3)];
      u += "k" + std::to_string(i) + "=" + value();
    }
    return u;
  };

  const std::size_t per_trace = 200;
  for (std::size_t v = 0; c.events < n_events; ++v) {
    const std::string site = sites[below(sites.size())];
    TraceBuilder b(label(site, kAllLeanings[v % 3]), "stateful-" + std::to_string(1 + v % 2));
    b.visit_id("visit-" + std::to_string(v));
    std::vector<std::string> pending;
    for (std::size_t k = 0; k < per_trace && c.events < n_events; ++k, ++c.events) {
      const std::size_t roll = below(100);
      const std::string& d = all_domains[below(all_domains.size())];
      if (roll < 15) {
        const std::string target = url(all_domains[below(all_domains.size())]);
        b.redirect(url(d), target);
        if (chance(60)) pending.push_back(target);
      } else if (roll < 30) {
        b.response(url(d));
      } else {
        std::string u;
        if (!pending.empty() && chance(40)) {
          u = pending.back();
          pending.pop_back();
        } else if (chance(3)) {
          u = chance(50) ? "https://co.uk/x?uid=" + value() : "not a url " + value();
        } else {
          u = url(d);
        }
        std::optional<std::string> ref;
        const std::size_t r = below(10);
        if (r < 3) ref = url(all_domains[below(all_domains.size())]);
        else if (r < 5) ref = b.page();
        HttpEvent& e = b.request(u, chance(20) ? std::nullopt : ref);
        if (ref && !e.referrer) e.headers.emplace_back("Referer", *ref);
      }
    }
    c.traces.push_back(b.build());
  }
  return c;
}

}  // namespace tltest
