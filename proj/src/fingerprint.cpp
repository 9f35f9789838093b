#include "fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "strings.hpp"

namespace tracklens {

namespace {

using Call = std::pair<std::string, JsApiCall>;

std::string_view interface_of(const JsApiCall& c) {
  const auto dot = c.symbol.find('.');
  return dot == std::string::npos ? std::string_view(c.symbol) : std::string_view(c.symbol).substr(0, dot);
}

std::string_view member_of(const JsApiCall& c) {
  const auto dot = c.symbol.find('.');
  return dot == std::string::npos ? std::string_view{} : std::string_view(c.symbol).substr(dot + 1);
}

bool one_of(std::string_view s, std::initializer_list<std::string_view> options) {
  return std::find(options.begin(), options.end(), s) != options.end();
}

// Deterministic representative: earliest call, ties broken by content so the
// choice does not depend on log order.
const Call* earliest(const std::vector<const Call*>& calls) {
  const Call* best = nullptr;
  for (const Call* c : calls) {
    if (!best || std::tie(c->second.timestamp, c->second.symbol, c->second.arguments) <
                     std::tie(best->second.timestamp, best->second.symbol, best->second.arguments))
      best = c;
  }
  return best;
}

std::optional<double> numeric_arg(const JsApiCall& c, std::size_t i) {
  if (i >= c.arguments.size()) return std::nullopt;
  return parse_double(c.arguments[i]);
}

// Canvas size in force at `ts`: the latest width/height assignment at or
// before it (largest value on a timestamp tie), else the 300x150 default.
std::pair<double, double> canvas_size_at(const std::vector<Call>& calls, std::int64_t ts) {
  double dims[2] = {300, 150};
  std::int64_t when[2] = {INT64_MIN, INT64_MIN};
  for (const auto& [id, c] : calls) {
    if (c.timestamp > ts || interface_of(c) != "HTMLCanvasElement" || c.operation != ApiOperation::kSet)
      continue;
    const std::string_view m = member_of(c);
    const int which = m == "width" ? 0 : (m == "height" ? 1 : -1);
    if (which < 0) continue;
    const auto v = numeric_arg(c, 0);
    if (!v) continue;
    if (c.timestamp > when[which] || (c.timestamp == when[which] && *v > dims[which])) {
      when[which] = c.timestamp;
      dims[which] = *v;
    }
  }
  return {dims[0], dims[1]};
}

bool is_audio_context_interface(std::string_view iface) {
  return one_of(iface, {"AudioContext", "OfflineAudioContext", "webkitAudioContext",
                        "webkitOfflineAudioContext", "BaseAudioContext"});
}

}  // namespace

std::string_view to_string(FingerprintKind k) {
  switch (k) {
    case FingerprintKind::kCanvas: return "canvas";
    case FingerprintKind::kWebRtc: return "webrtc";
    case FingerprintKind::kAudioContext: return "audiocontext";
  }
  return "?";
}

std::vector<ScriptActivity> group_script_activity(std::span<const CrawlTrace> traces) {
  std::vector<ScriptActivity> out;
  for (const auto& t : traces) {
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < t.js_calls.size(); ++i) {
      const JsApiCall& c = t.js_calls[i];
      auto [it, inserted] = slot.try_emplace(c.script_url, out.size());
      if (inserted) out.push_back({t.visit_id, t.site.site_id, c.script_url, {}});
      out[it->second].calls.emplace_back(js_call_id(t.visit_id, i), c);
    }
  }
  return out;
}

std::optional<std::vector<std::string>> detect_canvas(const ScriptActivity& script,
                                                      const FingerprintOptions& options) {
  std::vector<const Call*> extractions;
  for (const auto& call : script.calls) {
    const JsApiCall& c = call.second;
    if (c.operation != ApiOperation::kCall) continue;
    if (c.symbol == "HTMLCanvasElement.toDataURL") {
      const auto [w, h] = canvas_size_at(script.calls, c.timestamp);
      if (w >= options.min_canvas_width && h >= options.min_canvas_height) extractions.push_back(&call);
    } else if (c.symbol == "CanvasRenderingContext2D.getImageData") {
      const auto w = numeric_arg(c, 2), h = numeric_arg(c, 3);
      if (w && h && std::fabs(*w) >= options.min_canvas_width && std::fabs(*h) >= options.min_canvas_height)
        extractions.push_back(&call);
    }
  }
  if (extractions.empty()) return std::nullopt;
  if (!options.require_text_before_extract) return std::vector<std::string>{earliest(extractions)->first};

  auto is_text = [](const JsApiCall& c) {
    if (interface_of(c) != "CanvasRenderingContext2D") return false;
    const std::string_view m = member_of(c);
    if (c.operation == ApiOperation::kCall) return m == "fillText" || m == "strokeText";
    if (c.operation == ApiOperation::kSet) return m == "fillStyle" || m == "font";
    return false;
  };
  // Earliest extraction that has text drawn at or before it.
  std::sort(extractions.begin(), extractions.end(), [](const Call* a, const Call* b) {
    return std::tie(a->second.timestamp, a->second.symbol, a->second.arguments) <
           std::tie(b->second.timestamp, b->second.symbol, b->second.arguments);
  });
  for (const Call* ext : extractions) {
    std::vector<const Call*> text;
    for (const auto& call : script.calls)
      if (is_text(call.second) && call.second.timestamp <= ext->second.timestamp) text.push_back(&call);
    if (!text.empty()) return std::vector<std::string>{earliest(text)->first, ext->first};
  }
  return std::nullopt;
}

std::optional<std::vector<std::string>> detect_webrtc(const ScriptActivity& script) {
  std::vector<const Call*> construct, channel, offer;
  for (const auto& call : script.calls) {
    const JsApiCall& c = call.second;
    const std::string_view iface = interface_of(c), m = member_of(c);
    if ((iface == "window" && one_of(m, {"RTCPeerConnection", "webkitRTCPeerConnection", "mozRTCPeerConnection"})) ||
        (one_of(iface, {"RTCPeerConnection", "webkitRTCPeerConnection", "mozRTCPeerConnection"}) && m == "constructor")) {
      construct.push_back(&call);
    } else if (iface.ends_with("RTCPeerConnection") && m == "createDataChannel") {
      channel.push_back(&call);
    } else if (iface.ends_with("RTCPeerConnection") && m == "createOffer") {
      offer.push_back(&call);
    }
  }
  if (construct.empty() || channel.empty() || offer.empty()) return std::nullopt;
  return std::vector<std::string>{earliest(construct)->first, earliest(channel)->first, earliest(offer)->first};
}

std::optional<std::vector<std::string>> detect_audiocontext(const ScriptActivity& script,
                                                            const FingerprintOptions& options) {
  std::vector<const Call*> construct, oscillator, read;
  for (const auto& call : script.calls) {
    const JsApiCall& c = call.second;
    const std::string_view iface = interface_of(c), m = member_of(c);
    if ((iface == "window" && is_audio_context_interface(m)) ||
        (is_audio_context_interface(iface) && m == "constructor")) {
      construct.push_back(&call);
    } else if ((is_audio_context_interface(iface) && m == "createOscillator") || iface == "OscillatorNode") {
      oscillator.push_back(&call);
    } else if ((iface == "AudioBuffer" && one_of(m, {"getChannelData", "copyFromChannel"})) ||
               (iface == "AnalyserNode" && one_of(m, {"getFloatFrequencyData", "getByteFrequencyData",
                                                       "getFloatTimeDomainData", "getByteTimeDomainData"}))) {
      read.push_back(&call);
    }
  }
  // Creating an oscillator through a context's factory method is itself
  // evidence that the context exists.
  for (const Call* c : oscillator)
    if (is_audio_context_interface(interface_of(c->second))) construct.push_back(c);
  if (construct.empty() || oscillator.empty()) return std::nullopt;
  if (options.require_buffer_read && read.empty()) return std::nullopt;

  std::vector<std::string> evidence{earliest(construct)->first};
  if (earliest(oscillator)->first != evidence[0]) evidence.push_back(earliest(oscillator)->first);
  if (!read.empty()) evidence.push_back(earliest(read)->first);
  return evidence;
}

std::vector<FingerprintFinding> detect_fingerprints(std::span<const CrawlTrace> traces,
                                                    const SuffixSet& suffixes,
                                                    const FingerprintOptions& options) {
  std::vector<FingerprintFinding> out;
  for (const auto& script : group_script_activity(traces)) {
    const std::string domain = suffixes.try_registrable_domain(script.script_url).value_or(script.script_url);
    auto add = [&](FingerprintKind kind, std::optional<std::vector<std::string>> evidence) {
      if (!evidence) return;
      out.push_back({script.visit_id, script.site_id, script.script_url, domain, kind, std::move(*evidence)});
    };
    add(FingerprintKind::kCanvas, detect_canvas(script, options));
    add(FingerprintKind::kWebRtc, detect_webrtc(script));
    add(FingerprintKind::kAudioContext, detect_audiocontext(script, options));
  }
  std::sort(out.begin(), out.end(), [](const FingerprintFinding& a, const FingerprintFinding& b) {
    return std::tie(a.site_id, a.visit_id, a.script_url, a.kind) <
           std::tie(b.site_id, b.visit_id, b.script_url, b.kind);
  });
  return out;
}

FingerprintSummary fingerprint_summary(std::span<const FingerprintFinding> findings,
                                       const LabelSet& labels) {
  FingerprintSummary s;
  auto fill = [](FingerprintGroupStats& g, std::size_t total, const std::vector<const FingerprintFinding*>& fs) {
    std::set<std::string> sites, domains;
    std::set<std::pair<std::string, FingerprintKind>> scripts;
    for (const auto* f : fs) {
      sites.insert(f->site_id);
      domains.insert(f->script_domain);
      scripts.emplace(f->script_url, f->kind);
    }
    g.sites_total = total;
    g.sites_flagged = sites.size();
    g.fraction = total ? static_cast<double>(sites.size()) / static_cast<double>(total) : 0.0;
    g.distinct_scripts = scripts.size();
    g.distinct_domains = domains.size();
  };

  std::set<std::string> all_sites;
  std::vector<const FingerprintFinding*> all;
  for (const auto& f : findings) all.push_back(&f);
  for (Leaning l : kAllLeanings) {
    const auto sites = labels.sites(l);
    all_sites.insert(sites.begin(), sites.end());
    std::vector<const FingerprintFinding*> group;
    for (const auto& f : findings)
      if (labels.leaning_of(f.site_id) == l) group.push_back(&f);
    fill(s.by_leaning[l], sites.size(), group);
  }
  fill(s.overall, all_sites.size(), all);

  for (FingerprintKind k : kAllFingerprintKinds) {
    std::set<std::string> scripts, sites, domains;
    for (const auto& f : findings) {
      if (f.kind != k) continue;
      scripts.insert(f.script_url);
      sites.insert(f.site_id);
      domains.insert(f.script_domain);
    }
    s.by_kind[k] = {scripts.size(), sites.size(), domains.size()};
  }
  return s;
}

}  // namespace tracklens
