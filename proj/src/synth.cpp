#include "synth.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <random>
#include <set>
#include <tuple>

#include "error.hpp"
#include "strings.hpp"

namespace tracklens {

namespace {

constexpr std::int64_t kDayMs = 86'400'000;
constexpr std::int64_t kEpochMs = 1'593'561'600'000;  // 2020-07-01T00:00:00Z

// Bounded draws are done by hand so output does not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  std::size_t below(std::size_t n) { return n ? static_cast<std::size_t>(next() % n) : 0; }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  bool chance(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::string hex_string(Rng& rng, std::size_t n) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(n, '0');
  for (auto& c : s) c = kHex[rng.below(16)];
  return s;
}

// Hex with UUID-style dashes once long enough; never starts or ends with '-'.
std::string make_token(Rng& rng, std::size_t len) {
  std::string s = hex_string(rng, len);
  if (len >= 24)
    for (std::size_t at : {8u, 13u, 18u, 23u})
      if (at < len - 1) s[at] = '-';
  return s;
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

std::uint32_t crc32(const std::vector<std::uint8_t>& data, std::size_t from) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t n = 0; n < 256; ++n) {
      std::uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[n] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = from; i < data.size(); ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}
void put_le32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 0; s < 32; s += 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}
void put_le16(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}
void put_be16(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}
void put_str(std::vector<std::uint8_t>& v, std::string_view s) { v.insert(v.end(), s.begin(), s.end()); }

void png_chunk(std::vector<std::uint8_t>& v, std::string_view type, const std::vector<std::uint8_t>& data) {
  put_be32(v, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = v.size();
  put_str(v, type);
  v.insert(v.end(), data.begin(), data.end());
  put_be32(v, crc32(v, start));
}

std::vector<std::uint8_t> make_png(std::uint32_t w, std::uint32_t h, std::size_t pad) {
  std::vector<std::uint8_t> v;
  put_str(v, "\x89PNG\r\n\x1a\n");
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, w);
  put_be32(ihdr, h);
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // 8-bit greyscale
  png_chunk(v, "IHDR", ihdr);
  if (pad) {
    std::vector<std::uint8_t> text;
    put_str(text, "Comment");
    text.push_back(0);
    text.insert(text.end(), pad, 'x');
    png_chunk(v, "tEXt", text);
  }
  // Raw rows (filter byte 0) in stored deflate blocks.
  std::vector<std::uint8_t> raw;
  for (std::uint32_t y = 0; y < h; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), w, 0x80);
  }
  std::vector<std::uint8_t> z = {0x78, 0x01};
  std::size_t pos = 0;
  do {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - pos);
    z.push_back(pos + n == raw.size() ? 1 : 0);
    put_le16(z, static_cast<std::uint32_t>(n));
    put_le16(z, static_cast<std::uint32_t>(~n & 0xFFFF));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos), raw.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  } while (pos < raw.size());
  std::uint32_t a = 1, b = 0;
  for (auto byte : raw) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  put_be32(z, (b << 16) | a);
  png_chunk(v, "IDAT", z);
  png_chunk(v, "IEND", {});
  return v;
}

std::vector<std::uint8_t> make_gif(std::uint32_t w, std::uint32_t h, std::size_t pad) {
  std::vector<std::uint8_t> v;
  put_str(v, "GIF89a");
  put_le16(v, w);
  put_le16(v, h);
  v.insert(v.end(), {0x80, 0, 0, 0, 0, 0, 0xFF, 0xFF, 0xFF});
  v.insert(v.end(), {0x21, 0xF9, 0x04, 0x01, 0, 0, 0, 0});
  v.insert(v.end(), {0x2C, 0, 0, 0, 0});
  put_le16(v, w);
  put_le16(v, h);
  v.push_back(0);
  v.insert(v.end(), {0x02, 0x02, 0x44, 0x01, 0x00});
  while (pad > 0) {
    const std::size_t n = std::min<std::size_t>(pad, 255);
    v.insert(v.end(), {0x21, 0xFE, static_cast<std::uint8_t>(n)});
    v.insert(v.end(), n, 'x');
    v.push_back(0);
    pad -= n;
  }
  v.push_back(0x3B);
  return v;
}

std::vector<std::uint8_t> make_jpeg(std::uint32_t w, std::uint32_t h, std::size_t pad) {
  std::vector<std::uint8_t> v = {0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x10};
  put_str(v, "JFIF");
  v.insert(v.end(), {0, 1, 1, 0, 0, 1, 0, 1, 0, 0});
  while (pad > 0) {
    const std::size_t n = std::min<std::size_t>(pad, 65000);
    v.insert(v.end(), {0xFF, 0xFE});
    put_be16(v, static_cast<std::uint32_t>(n + 2));
    v.insert(v.end(), n, 'x');
    pad -= n;
  }
  v.insert(v.end(), {0xFF, 0xC0, 0x00, 0x0B, 0x08});
  put_be16(v, h);
  put_be16(v, w);
  v.insert(v.end(), {0x01, 0x01, 0x11, 0x00});
  v.insert(v.end(), {0xFF, 0xD9});
  return v;
}

std::vector<std::uint8_t> make_webp(std::uint32_t w, std::uint32_t h, std::size_t pad) {
  std::vector<std::uint8_t> chunk = {0x2F};
  const std::uint32_t bits = (w - 1) | ((h - 1) << 14) | (1u << 28);
  put_le32(chunk, bits);
  chunk.insert(chunk.end(), {0x00, 0x00, 0x00});
  chunk.insert(chunk.end(), pad + (pad & 1), 0);
  std::vector<std::uint8_t> v;
  put_str(v, "RIFF");
  put_le32(v, static_cast<std::uint32_t>(12 + chunk.size()));
  put_str(v, "WEBPVP8L");
  put_le32(v, static_cast<std::uint32_t>(chunk.size()));
  v.insert(v.end(), chunk.begin(), chunk.end());
  return v;
}

std::vector<std::uint8_t> make_bmp(std::uint32_t w, std::uint32_t h, std::size_t pad) {
  const std::uint32_t row = (w * 3 + 3) & ~3u;
  const std::uint32_t offset = 54 + static_cast<std::uint32_t>(pad);
  std::vector<std::uint8_t> v;
  put_str(v, "BM");
  put_le32(v, offset + row * h);
  put_le32(v, 0);
  put_le32(v, offset);
  put_le32(v, 40);
  put_le32(v, w);
  put_le32(v, h);
  put_le16(v, 1);
  put_le16(v, 24);
  for (int i = 0; i < 6; ++i) put_le32(v, 0);
  v.insert(v.end(), pad, 0);
  v.insert(v.end(), static_cast<std::size_t>(row) * h, 0x7F);
  return v;
}

std::string mime_of(ImageFormat f) {
  switch (f) {
    case ImageFormat::kGif: return "image/gif";
    case ImageFormat::kPng: return "image/png";
    case ImageFormat::kJpeg: return "image/jpeg";
    case ImageFormat::kWebp: return "image/webp";
    case ImageFormat::kBmp: return "image/bmp";
    case ImageFormat::kUnknown: return "image/x-icon";
  }
  return "image/x-icon";
}

std::string ext_of(ImageFormat f) {
  switch (f) {
    case ImageFormat::kGif: return "gif";
    case ImageFormat::kPng: return "png";
    case ImageFormat::kJpeg: return "jpg";
    case ImageFormat::kWebp: return "webp";
    case ImageFormat::kBmp: return "bmp";
    case ImageFormat::kUnknown: return "ico";
  }
  return "ico";
}

std::optional<ImageFormat> parse_image_format(std::string_view s) {
  for (ImageFormat f : {ImageFormat::kGif, ImageFormat::kPng, ImageFormat::kJpeg, ImageFormat::kWebp,
                        ImageFormat::kBmp, ImageFormat::kUnknown})
    if (iequals(s, to_string(f))) return f;
  return std::nullopt;
}

std::optional<FingerprintKind> parse_fingerprint_kind(std::string_view s) {
  for (FingerprintKind k : kAllFingerprintKinds)
    if (iequals(s, to_string(k))) return k;
  return std::nullopt;
}

std::optional<SyncChannel> parse_channel(std::string_view s) {
  for (SyncChannel c : {SyncChannel::kRequestUrl, SyncChannel::kReferrer, SyncChannel::kRedirectLocation})
    if (iequals(s, to_string(c))) return c;
  return std::nullopt;
}

[[noreturn]] void inconsistent(const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "plant spec: " + what); }

std::string entry(std::string_view plan, std::size_t i) { return std::string(plan) + "[" + std::to_string(i) + "]"; }

// ---- visit assembly ---------------------------------------------------------

struct Visit {
  Visit(CrawlTrace& t, std::int64_t start, Rng& r) : trace(t), clock(start), rng(r) {}

  CrawlTrace& trace;
  std::int64_t clock;
  Rng& rng;
  std::size_t events = 0;
  std::set<std::pair<std::string, std::string>> cookie_keys;
  std::size_t cookie_count = 0;
  std::size_t tp_count = 0;

  std::int64_t tick() { return clock += 1 + static_cast<std::int64_t>(rng.below(15)); }

  HttpEvent& add(EventKind kind, std::string url) {
    HttpEvent e;
    e.event_id = trace.visit_id + ":e" + std::to_string(events++);
    e.visit_id = trace.visit_id;
    e.kind = kind;
    e.url = std::move(url);
    e.timestamp = tick();
    e.top_level_site = trace.site.site_id;
    trace.events.push_back(std::move(e));
    return trace.events.back();
  }

  std::string request(std::string url, std::optional<std::string> referrer) {
    HttpEvent& e = add(EventKind::kRequest, std::move(url));
    e.referrer = std::move(referrer);
    return e.event_id;
  }

  std::string response(const std::string& url, int status, std::optional<std::string> type,
                        std::optional<std::size_t> length, const std::vector<std::uint8_t>* body) {
    HttpEvent& e = add(EventKind::kResponse, url);
    e.status = status;
    if (type) e.headers.emplace_back("Content-Type", *type);
    if (length) e.headers.emplace_back("Content-Length", std::to_string(*length));
    if (body) e.body_base64 = base64_encode(*body);
    return e.event_id;
  }

  void js(const std::string& script, std::string symbol, ApiOperation op, std::vector<std::string> args = {}) {
    JsApiCall c;
    c.visit_id = trace.visit_id;
    c.script_url = script;
    c.symbol = std::move(symbol);
    c.operation = op;
    c.arguments = std::move(args);
    c.timestamp = tick();
    trace.js_calls.push_back(std::move(c));
  }

  void cookie(const std::string& host, const std::string& name, std::string value,
              std::optional<std::int64_t> lifetime_ms, bool third_party, std::int64_t set_time) {
    if (!cookie_keys.emplace(host, name).second)
      inconsistent("cookie '" + name + "' on " + host + " planted twice in visit " + trace.visit_id);
    CookieRecord c;
    c.visit_id = trace.visit_id;
    c.setter_domain = host;
    c.name = name;
    c.value = std::move(value);
    c.set_time = set_time;
    if (lifetime_ms) c.expiry = set_time + *lifetime_ms;
    c.is_first_party_context = !third_party;
    c.crawl_id = trace.crawl_id;
    trace.cookies.push_back(std::move(c));
    ++cookie_count;
    tp_count += third_party;
  }
};

std::string page_url(const std::string& site) { return "https://www." + site + "/"; }

std::string sender_url(const std::string& sender, const std::string& site) {
  return sender == site ? page_url(site) : "https://frame." + sender + "/";
}

struct Context {
  const PlantSpec& spec;
  std::map<std::string, std::string> id_tokens;  // id plan name -> token
  std::map<std::string, const IdPlan*> id_plans;
  // Decoy tokens per site, fixed across crawls as a persistent profile would keep them.
  std::map<std::string, std::map<std::string, std::string>> decoy_tokens;
  GroundTruth& truth;
};

const std::vector<std::string> kFillerWords = {"app", "vendor", "main", "styles", "bundle", "runtime", "polyfill", "analytics", "comments", "video"};
const std::vector<std::string> kFillerTypes = {"application/javascript", "text/css", "application/json", "text/html"};

void plant_canvas(Visit& v, const std::string& script, bool image_data) {
  v.js(script, "HTMLCanvasElement.getContext", ApiOperation::kCall, {"2d"});
  v.js(script, "HTMLCanvasElement.width", ApiOperation::kSet, {"220"});
  v.js(script, "HTMLCanvasElement.height", ApiOperation::kSet, {"30"});
  v.js(script, "CanvasRenderingContext2D.textBaseline", ApiOperation::kSet, {"top"});
  v.js(script, "CanvasRenderingContext2D.font", ApiOperation::kSet, {"14px 'Arial'"});
  v.js(script, "CanvasRenderingContext2D.fillStyle", ApiOperation::kSet, {"#f60"});
  v.js(script, "CanvasRenderingContext2D.fillRect", ApiOperation::kCall, {"125", "1", "62", "20"});
  v.js(script, "CanvasRenderingContext2D.fillText", ApiOperation::kCall, {"Cwm fjordbank glyphs vext quiz", "2", "15"});
  if (image_data)
    v.js(script, "CanvasRenderingContext2D.getImageData", ApiOperation::kCall, {"0", "0", "220", "30"});
  else
    v.js(script, "HTMLCanvasElement.toDataURL", ApiOperation::kCall);
}

void plant_webrtc(Visit& v, const std::string& script, bool constructor_form) {
  if (constructor_form)
    v.js(script, "RTCPeerConnection.constructor", ApiOperation::kCall, {"{\"iceServers\":[]}"});
  else
    v.js(script, "window.RTCPeerConnection", ApiOperation::kCall, {"{\"iceServers\":[]}"});
  v.js(script, "RTCPeerConnection.createDataChannel", ApiOperation::kCall, {""});
  v.js(script, "RTCPeerConnection.onicecandidate", ApiOperation::kSet, {"function"});
  v.js(script, "RTCPeerConnection.createOffer", ApiOperation::kCall);
  v.js(script, "RTCPeerConnection.setLocalDescription", ApiOperation::kCall);
}

void plant_audio(Visit& v, const std::string& script, bool offline) {
  const std::string ctx = offline ? "OfflineAudioContext" : "AudioContext";
  if (offline)
    v.js(script, "window.OfflineAudioContext", ApiOperation::kCall, {"1", "44100", "44100"});
  else
    v.js(script, "AudioContext.constructor", ApiOperation::kCall);
  v.js(script, ctx + ".createOscillator", ApiOperation::kCall);
  v.js(script, "OscillatorNode.type", ApiOperation::kSet, {"triangle"});
  v.js(script, ctx + ".createDynamicsCompressor", ApiOperation::kCall);
  v.js(script, "OscillatorNode.connect", ApiOperation::kCall);
  v.js(script, "OscillatorNode.start", ApiOperation::kCall, {"0"});
  if (offline) {
    v.js(script, "OfflineAudioContext.startRendering", ApiOperation::kCall);
    v.js(script, "AudioBuffer.getChannelData", ApiOperation::kCall, {"0"});
  } else {
    v.js(script, "AudioContext.createAnalyser", ApiOperation::kCall);
    v.js(script, "AnalyserNode.getFloatFrequencyData", ApiOperation::kCall, {"Float32Array(1024)"});
  }
}

void fetch_script(Visit& v, const std::string& url) {
  v.request(url, page_url(v.trace.site.site_id));
  v.response(url, 200, "application/javascript", std::nullopt, nullptr);
}

using Unit = std::function<void(Visit&)>;

void desktop_units(Context& ctx, const SiteLabel& site, int crawl, std::int64_t start,
                   std::vector<Unit>& units) {
  const PlantSpec& spec = ctx.spec;
  const std::string s = site.site_id;
  const std::string page = page_url(s);
  GroundTruth& truth = ctx.truth;

  for (std::size_t i = 0; i < spec.background_requests; ++i) {
    units.push_back([=](Visit& v) {
      const std::string host = v.rng.chance(0.5) ? "static." + s : "www." + s;
      const std::size_t kind = v.rng.below(kFillerTypes.size());
      static const char* kExt[] = {"js", "css", "json", "html"};
      const std::string url = "https://" + host + "/assets/" + v.rng.pick(kFillerWords) + std::to_string(i) + "." +
                              kExt[kind] + "?v=" + std::to_string(v.rng.between(100, 999));
      v.request(url, page);
      v.response(url, 200, kFillerTypes[kind], v.rng.between(200, 90000), nullptr);
    });
  }

  for (const auto& plan : spec.images) {
    if (plan.site != s) continue;
    for (std::size_t i = 0; i < plan.count; ++i) {
      units.push_back([=, &truth](Visit& v) {
        static const ImageFormat kFormats[] = {ImageFormat::kJpeg, ImageFormat::kPng, ImageFormat::kGif, ImageFormat::kWebp};
        const ImageFormat f = kFormats[v.rng.below(4)];
        const std::string url = "https://img." + s + "/media/" + std::to_string(i) + "." + ext_of(f);
        v.request(url, page);
        ++truth.image_responses;
        if (v.rng.chance(0.7)) {
          v.response(url, 200, mime_of(f), v.rng.between(2048, 60000), nullptr);
        } else {
          const auto body = synth_image(f, static_cast<std::uint32_t>(v.rng.between(2, 64)),
                                        static_cast<std::uint32_t>(v.rng.between(2, 64)));
          v.response(url, 200, mime_of(f), body.size(), &body);
        }
      });
    }
  }

  for (std::size_t p = 0; p < spec.pixels.size(); ++p) {
    const PixelPlan& plan = spec.pixels[p];
    if (plan.site != s) continue;
    for (std::size_t i = 0; i < plan.count; ++i) {
      units.push_back([=, &truth](Visit& v) {
        const std::string url = "https://px." + plan.domain + "/b/" + std::to_string(p) + "-" + std::to_string(i) + "." +
                                ext_of(plan.format) + "?e=pv&r=" + hex_string(v.rng, 6);
        v.request(url, page);
        const auto body = synth_image(plan.format, 1, 1);
        const bool with_length = v.rng.chance(0.5);
        const std::string id = v.response(url, 200, mime_of(plan.format),
                                          with_length ? std::optional<std::size_t>(body.size()) : std::nullopt, &body);
        ++truth.image_responses;
        truth.pixels.push_back({v.trace.visit_id, s, id, url, plan.domain});
      });
    }
  }

  for (std::size_t k = 0; k < spec.syncs.size(); ++k) {
    const SyncPlan& plan = spec.syncs[k];
    if (plan.site != s) continue;
    units.push_back([=, &ctx, &truth](Visit& v) {
      const IdPlan& id = *ctx.id_plans.at(plan.id);
      const std::string& token = ctx.id_tokens.at(plan.id);
      SyncEvent e;
      e.token = token;
      e.origin_domain = id.origin;
      e.cookie_name = id.cookie_name;
      e.sender = plan.sender.value_or(s);
      e.receiver = plan.receiver;
      e.channel = plan.channel;
      e.sender_inferred = !plan.sender;
      e.visit_id = v.trace.visit_id;
      e.visit_site = s;
      const std::string tag = "p" + std::to_string(k);
      auto carry = [&](const std::string& base, const std::string& key) {
        if (!plan.percent_encoded) return base + key + "=" + token;
        return base + "next=" + url_encode("https://cm." + plan.receiver + "/set?" + key + "=" + token);
      };
      switch (plan.channel) {
        case SyncChannel::kRequestUrl: {
          const std::string url = carry("https://sync." + plan.receiver + "/match?src=" + tag + "&", "uid");
          std::optional<std::string> ref;
          if (plan.sender) ref = sender_url(*plan.sender, s);
          e.evidence_event_id = v.request(url, ref);
          e.evidence_url = url;
          v.response(url, 200, "text/plain", 0, nullptr);
          break;
        }
        case SyncChannel::kReferrer: {
          const std::string ref = carry(sender_url(*plan.sender, s) + "?slot=" + tag + "&", "partner_uid");
          const std::string url = "https://collect." + plan.receiver + "/c?ev=view&src=" + tag;
          e.evidence_event_id = v.request(url, ref);
          e.evidence_url = ref;
          v.response(url, 200, "text/plain", 0, nullptr);
          break;
        }
        case SyncChannel::kRedirectLocation: {
          const std::string host = *plan.sender == s ? "www." + s : "redir." + *plan.sender;
          const std::string url = "https://" + host + "/rd?src=" + tag;
          const std::string location = carry("https://sync." + plan.receiver + "/set?src=" + tag + "&", "buyer_uid");
          v.request(url, page);
          HttpEvent& r = v.add(EventKind::kRedirect, url);
          r.status = 302;
          r.location = location;
          r.headers.emplace_back("Location", location);
          e.evidence_event_id = r.event_id;
          e.evidence_url = location;
          v.request(location, page);
          v.response(location, 204, std::nullopt, std::nullopt, nullptr);
          break;
        }
      }
      truth.syncs.push_back(std::move(e));
    });
  }

  for (std::size_t k = 0; k < spec.fingerprints.size(); ++k) {
    const FingerprintPlan& plan = spec.fingerprints[k];
    if (plan.site != s) continue;
    units.push_back([=, &truth](Visit& v) {
      const std::string host = plan.script_domain == s ? "www." + s : "cdn." + plan.script_domain;
      std::string name;
      for (FingerprintKind kind : plan.kinds) name += std::string(to_string(kind)) + "-";
      const std::string script = "https://" + host + "/js/" + name + std::to_string(k) + ".js";
      fetch_script(v, script);
      for (FingerprintKind kind : plan.kinds) {
        switch (kind) {
          case FingerprintKind::kCanvas: plant_canvas(v, script, k % 2 == 1); break;
          case FingerprintKind::kWebRtc: plant_webrtc(v, script, k % 2 == 1); break;
          case FingerprintKind::kAudioContext: plant_audio(v, script, k % 2 == 0); break;
        }
        truth.fingerprints.push_back({v.trace.visit_id, s, script, kind});
      }
    });
  }

  // Ordinary script activity.
  for (int i = 0; i < 2; ++i) {
    units.push_back([=](Visit& v) {
      const std::string script = "https://www." + s + "/js/site-" + std::to_string(i) + ".js";
      fetch_script(v, script);
      v.js(script, "Window.navigator", ApiOperation::kGet);
      v.js(script, "Navigator.userAgent", ApiOperation::kGet);
      v.js(script, "Document.cookie", ApiOperation::kGet);
      v.js(script, "Storage.getItem", ApiOperation::kCall, {"consent"});
      v.js(script, "HTMLCanvasElement.getContext", ApiOperation::kCall, {"2d"});
      v.js(script, "CanvasRenderingContext2D.fillRect", ApiOperation::kCall, {"0", "0", "10", "10"});
    });
  }

  if (!spec.decoys) return;
  auto& decoy = truth.decoys;
  const auto& tokens = ctx.decoy_tokens.at(s);

  // Tokens that fail exactly one eligibility rule, each sent to a sink.
  struct CookieDecoy {
    const char* kind;
    const char* domain;
    const char* name;
    std::optional<std::int64_t> lifetime;
    bool first_crawl_only;
  };
  static const CookieDecoy kCookieDecoys[] = {
      {"short_token", "shortid.net", "sid", 400 * kDayMs, false},
      {"short_lifetime", "brieflife.com", "bl", 29 * kDayMs, false},
      {"lifetime_boundary", "brieflife.com", "bl30", 30 * kDayMs, false},
      {"single_crawl", "oneshot.io", "os", 400 * kDayMs, true},
      {"session_cookie", "sessiontag.com", "st", std::nullopt, false},
      {"malformed_expiry", "badclock.org", "bc", -kDayMs, false},
      {"long_token", "longtok.com", "lt", 400 * kDayMs, false},
  };
  for (const auto& d : kCookieDecoys) {
    if (d.first_crawl_only && crawl != 0) continue;
    const std::string& token = tokens.at(d.kind);
    units.push_back([=, &decoy](Visit& v) {
      v.cookie(d.domain, d.name, token, d.lifetime, true, start);
      const std::string url = "https://sink.decoy-sink.com/s?v=" + token;
      v.request(url, "https://frame." + std::string(d.domain) + "/");
      v.response(url, 200, "text/plain", 0, nullptr);
      ++decoy[d.kind];
    });
  }

  const IdPlan* carried = nullptr;
  for (const auto& id : spec.ids)
    if (id.origin != s && std::find(id.carriers.begin(), id.carriers.end(), s) != id.carriers.end()) {
      carried = &id;
      break;
    }
  if (carried) {
    const std::string token = ctx.id_tokens.at(carried->name);
    const std::string origin = carried->origin;
    units.push_back([=, &decoy](Visit& v) {
      const std::string url = "https://px." + origin + "/ping?u=" + token;
      v.request(url, page);
      v.response(url, 200, "text/plain", 0, nullptr);
      const std::string bare = "https://px." + origin + "/hello?u=" + token;
      v.request(bare, std::nullopt);
      v.response(bare, 200, "text/plain", 0, nullptr);
      decoy["own_origin"] += 2;
    });
    units.push_back([=, &decoy](Visit& v) {
      const std::string url = "https://sink.decoy-sink.com/m?u=x" + token + "&w=" + token + "-v2";
      v.request(url, "https://frame.decoy-src.com/");
      v.response(url, 200, "text/plain", 0, nullptr);
      ++decoy["embedded_token"];
    });
  }

  units.push_back([=, &decoy](Visit& v) {
    const std::string base = "https://cdn.decoy-scripts.com/js/";
    const std::string no_extract = base + "draw-only.js";
    fetch_script(v, no_extract);
    v.js(no_extract, "HTMLCanvasElement.getContext", ApiOperation::kCall, {"2d"});
    v.js(no_extract, "CanvasRenderingContext2D.fillStyle", ApiOperation::kSet, {"#069"});
    v.js(no_extract, "CanvasRenderingContext2D.fillText", ApiOperation::kCall, {"hello", "2", "15"});

    const std::string small = base + "small-canvas.js";
    fetch_script(v, small);
    v.js(small, "HTMLCanvasElement.width", ApiOperation::kSet, {"10"});
    v.js(small, "HTMLCanvasElement.height", ApiOperation::kSet, {"10"});
    v.js(small, "CanvasRenderingContext2D.fillText", ApiOperation::kCall, {"a", "0", "8"});
    v.js(small, "HTMLCanvasElement.toDataURL", ApiOperation::kCall);
    v.js(small, "CanvasRenderingContext2D.getImageData", ApiOperation::kCall, {"0", "0", "8", "8"});

    const std::string early = base + "extract-first.js";
    fetch_script(v, early);
    v.js(early, "HTMLCanvasElement.toDataURL", ApiOperation::kCall);
    v.js(early, "CanvasRenderingContext2D.font", ApiOperation::kSet, {"12px serif"});
    v.js(early, "CanvasRenderingContext2D.fillText", ApiOperation::kCall, {"late", "0", "8"});

    const std::string offer = base + "rtc-offer.js";
    fetch_script(v, offer);
    v.js(offer, "window.RTCPeerConnection", ApiOperation::kCall);
    v.js(offer, "RTCPeerConnection.createOffer", ApiOperation::kCall);

    const std::string tone = base + "tone.js";
    fetch_script(v, tone);
    v.js(tone, "window.AudioContext", ApiOperation::kCall);
    v.js(tone, "AudioContext.createOscillator", ApiOperation::kCall);
    v.js(tone, "OscillatorNode.connect", ApiOperation::kCall);
    v.js(tone, "OscillatorNode.start", ApiOperation::kCall, {"0"});
    decoy["fingerprint_script"] += 5;
  });

  units.push_back([=, &truth, &decoy](Visit& v) {
    auto image = [&](const std::string& url, const std::string& type, const std::vector<std::uint8_t>* body,
                     std::size_t length, bool counts_as_image) {
      v.request(url, page);
      v.response(url, 200, type, length, body);
      truth.image_responses += counts_as_image;
    };
    const auto two = synth_image(ImageFormat::kGif, 2, 2);
    image("https://px.decoy-pixels.com/two.gif", "image/gif", &two, two.size(), true);
    const auto big = synth_image(ImageFormat::kPng, 1, 1, 1100);
    image("https://px.decoy-pixels.com/big.png", "image/png", &big, big.size(), true);
    image("https://px.decoy-pixels.com/headless.gif", "image/gif", nullptr, 43, true);
    const auto ico = synth_image(ImageFormat::kUnknown, 1, 1);
    image("https://px.decoy-pixels.com/favicon.ico", "image/x-icon", &ico, ico.size(), true);
    const auto text = synth_image(ImageFormat::kGif, 1, 1);
    image("https://px.decoy-pixels.com/mislabeled.gif", "text/plain", &text, text.size(), false);
    truth.undecodable += 2;
    decoy["pixel"] += 5;
  });
}

void check_spec(const PlantSpec& spec) {
  std::set<std::string> desktop, all_sites;
  std::set<std::pair<std::string, Platform>> roster;
  for (std::size_t i = 0; i < spec.sites.size(); ++i) {
    const auto& site = spec.sites[i];
    if (!roster.emplace(site.site_id, site.platform).second)
      inconsistent(entry("sites", i) + ": duplicate site '" + site.site_id + "' on " + std::string(to_string(site.platform)));
    all_sites.insert(site.site_id);
    if (site.platform == Platform::kDesktop) desktop.insert(site.site_id);
  }
  LabelSet labels(spec.sites);  // conflicting leanings
  auto need_desktop = [&](const std::string& where, const std::string& site) {
    if (!desktop.count(site)) inconsistent(where + ": unknown desktop site '" + site + "'");
  };
  if (spec.stateful_crawls < 0) inconsistent("stateful_crawls must not be negative");
  for (std::size_t i = 0; i < spec.cookies.size(); ++i)
    if (!roster.count({spec.cookies[i].site, spec.cookies[i].platform}))
      inconsistent(entry("cookies", i) + ": unknown site '" + spec.cookies[i].site + "' on " +
                   std::string(to_string(spec.cookies[i].platform)));

  std::map<std::string, std::size_t> ids;
  for (std::size_t i = 0; i < spec.ids.size(); ++i) {
    const auto& id = spec.ids[i];
    const std::string where = entry("ids", i);
    if (!ids.emplace(id.name, i).second) inconsistent(where + ": duplicate id name '" + id.name + "'");
    if (id.token_length < 11 || id.token_length > 128)
      inconsistent(where + ": token_length " + std::to_string(id.token_length) + " outside [11, 128]");
    if (id.carriers.empty()) inconsistent(where + ": no carriers");
    if (spec.stateful_crawls < 2)
      inconsistent(where + ": user IDs must recur in 2 stateful crawls, spec has " + std::to_string(spec.stateful_crawls));
    for (const auto& c : id.carriers) need_desktop(where, c);
  }
  for (std::size_t i = 0; i < spec.syncs.size(); ++i) {
    const auto& sync = spec.syncs[i];
    const std::string where = entry("syncs", i);
    need_desktop(where, sync.site);
    const auto it = ids.find(sync.id);
    if (it == ids.end()) inconsistent(where + ": unknown id '" + sync.id + "'");
    const IdPlan& id = spec.ids[it->second];
    const std::string id_where = entry("ids", it->second);
    if (std::find(id.carriers.begin(), id.carriers.end(), sync.site) == id.carriers.end())
      inconsistent(where + ": site '" + sync.site + "' does not carry " + id_where);
    if (!sync.sender && sync.channel != SyncChannel::kRequestUrl)
      inconsistent(where + ": channel " + std::string(to_string(sync.channel)) + " needs a sender");
    const std::string sender = sync.sender.value_or(sync.site);
    if (sender == sync.receiver) inconsistent(where + ": sender equals receiver '" + sender + "'");
    if (sync.receiver == id.origin && sender == sync.site)
      inconsistent(where + ": returns " + id_where + " to its origin from the visited page");
  }
  for (std::size_t i = 0; i < spec.fingerprints.size(); ++i) {
    const std::string where = entry("fingerprints", i);
    need_desktop(where, spec.fingerprints[i].site);
    if (spec.fingerprints[i].kinds.empty()) inconsistent(where + ": no kinds");
    std::set<FingerprintKind> kinds(spec.fingerprints[i].kinds.begin(), spec.fingerprints[i].kinds.end());
    if (kinds.size() != spec.fingerprints[i].kinds.size()) inconsistent(where + ": repeated kind");
  }
  for (std::size_t i = 0; i < spec.pixels.size(); ++i) {
    need_desktop(entry("pixels", i), spec.pixels[i].site);
    if (spec.pixels[i].format == ImageFormat::kUnknown)
      inconsistent(entry("pixels", i) + ": format must be decodable");
  }
  for (std::size_t i = 0; i < spec.images.size(); ++i) need_desktop(entry("images", i), spec.images[i].site);
}

Json string_list(const std::vector<std::string>& v) { return Json(v); }

}  // namespace

std::vector<std::uint8_t> synth_image(ImageFormat format, std::uint32_t width, std::uint32_t height,
                                      std::size_t min_bytes) {
  auto build = [&](std::size_t pad) {
    switch (format) {
      case ImageFormat::kGif: return make_gif(width, height, pad);
      case ImageFormat::kPng: return make_png(width, height, pad);
      case ImageFormat::kJpeg: return make_jpeg(width, height, pad);
      case ImageFormat::kWebp: return make_webp(width, height, pad);
      case ImageFormat::kBmp: return make_bmp(width, height, pad);
      case ImageFormat::kUnknown: break;
    }
    std::vector<std::uint8_t> v = {0, 0, 1, 0, 1, 0, static_cast<std::uint8_t>(width), static_cast<std::uint8_t>(height)};
    v.insert(v.end(), 30 + pad, 0);
    return v;
  };
  auto bytes = build(0);
  if (bytes.size() < min_bytes) bytes = build(min_bytes - bytes.size() + 8);
  return bytes;
}

std::string labels_csv(const std::vector<SiteLabel>& sites) {
  std::string out = "site_id,leaning,platform,display_name,followers\n";
  for (const auto& s : sites) {
    out += csv_field(s.site_id) + "," + std::string(to_string(s.leaning)) + "," + std::string(to_string(s.platform)) +
           "," + csv_field(s.display_name) + "," + (s.followers ? std::to_string(*s.followers) : "") + "\n";
  }
  return out;
}

PlantSpec plant_spec_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kFormat, "plant spec must be a JSON object");
  for (const char* key : {"sites", "cookies", "ids", "syncs", "fingerprints", "pixels", "images"})
    if (j.contains(key) && !j[key].is_array()) throw Error(ErrorCode::kFormat, std::string("plant spec: '") + key + "' must be an array");
  PlantSpec spec;
  try {
    spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
    spec.stateful_crawls = j.value("stateful_crawls", 3);
    spec.background_requests = j.value("background_requests", std::size_t{0});
    spec.decoys = j.value("decoys", false);
    for (const auto& s : j.value("sites", Json::array())) spec.sites.push_back(site_label_from_json(s));
    for (const auto& c : j.value("cookies", Json::array())) {
      CookiePlan p;
      p.site = c.at("site").get<std::string>();
      if (c.contains("platform")) {
        const auto pl = parse_platform(c.at("platform").get<std::string>());
        if (!pl) throw Error(ErrorCode::kFormat, "cookies: unknown platform");
        p.platform = *pl;
      }
      p.first_party = c.value("first_party", std::size_t{0});
      p.third_party = c.value("third_party", std::map<std::string, std::size_t>{});
      spec.cookies.push_back(std::move(p));
    }
    for (const auto& i : j.value("ids", Json::array())) {
      IdPlan p;
      p.name = i.at("name").get<std::string>();
      p.origin = i.at("origin").get<std::string>();
      p.cookie_name = i.at("cookie_name").get<std::string>();
      p.token_length = i.value("token_length", std::size_t{22});
      p.carriers = i.at("carriers").get<std::vector<std::string>>();
      spec.ids.push_back(std::move(p));
    }
    for (const auto& s : j.value("syncs", Json::array())) {
      SyncPlan p;
      p.site = s.at("site").get<std::string>();
      p.id = s.at("id").get<std::string>();
      const std::string channel = s.value("channel", "request_url");
      const auto c = parse_channel(channel);
      if (!c) throw Error(ErrorCode::kFormat, "syncs: unknown channel '" + channel + "'");
      p.channel = *c;
      if (s.contains("sender") && !s.at("sender").is_null()) p.sender = s.at("sender").get<std::string>();
      p.receiver = s.at("receiver").get<std::string>();
      p.percent_encoded = s.value("percent_encoded", false);
      spec.syncs.push_back(std::move(p));
    }
    for (const auto& f : j.value("fingerprints", Json::array())) {
      FingerprintPlan p;
      p.site = f.at("site").get<std::string>();
      p.script_domain = f.at("script_domain").get<std::string>();
      for (const auto& k : f.at("kinds")) {
        const auto kind = parse_fingerprint_kind(k.get<std::string>());
        if (!kind) throw Error(ErrorCode::kFormat, "fingerprints: unknown kind '" + k.get<std::string>() + "'");
        p.kinds.push_back(*kind);
      }
      spec.fingerprints.push_back(std::move(p));
    }
    for (const auto& x : j.value("pixels", Json::array())) {
      PixelPlan p;
      p.site = x.at("site").get<std::string>();
      p.domain = x.at("domain").get<std::string>();
      p.count = x.at("count").get<std::size_t>();
      const std::string format = x.value("format", "GIF");
      const auto f = parse_image_format(format);
      if (!f) throw Error(ErrorCode::kFormat, "pixels: unknown format '" + format + "'");
      p.format = *f;
      spec.pixels.push_back(std::move(p));
    }
    for (const auto& x : j.value("images", Json::array()))
      spec.images.push_back({x.at("site").get<std::string>(), x.at("count").get<std::size_t>()});
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("plant spec: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, std::string("plant spec: ") + e.what());
  }
  return spec;
}

Json to_json(const PlantSpec& spec) {
  Json j = {{"rng_seed", spec.rng_seed},
            {"stateful_crawls", spec.stateful_crawls},
            {"background_requests", spec.background_requests},
            {"decoys", spec.decoys}};
  j["sites"] = Json::array();
  for (const auto& s : spec.sites) j["sites"].push_back(to_json(s));
  j["cookies"] = Json::array();
  for (const auto& c : spec.cookies)
    j["cookies"].push_back({{"site", c.site},
                            {"platform", to_string(c.platform)},
                            {"first_party", c.first_party},
                            {"third_party", c.third_party}});
  j["ids"] = Json::array();
  for (const auto& i : spec.ids)
    j["ids"].push_back({{"name", i.name},
                        {"origin", i.origin},
                        {"cookie_name", i.cookie_name},
                        {"token_length", i.token_length},
                        {"carriers", string_list(i.carriers)}});
  j["syncs"] = Json::array();
  for (const auto& s : spec.syncs) {
    Json x = {{"site", s.site}, {"id", s.id}, {"channel", to_string(s.channel)}, {"receiver", s.receiver}};
    x["sender"] = s.sender ? Json(*s.sender) : Json(nullptr);
    x["percent_encoded"] = s.percent_encoded;
    j["syncs"].push_back(std::move(x));
  }
  j["fingerprints"] = Json::array();
  for (const auto& f : spec.fingerprints) {
    Json kinds = Json::array();
    for (auto k : f.kinds) kinds.push_back(to_string(k));
    j["fingerprints"].push_back({{"site", f.site}, {"script_domain", f.script_domain}, {"kinds", kinds}});
  }
  j["pixels"] = Json::array();
  for (const auto& p : spec.pixels)
    j["pixels"].push_back({{"site", p.site}, {"domain", p.domain}, {"count", p.count}, {"format", to_string(p.format)}});
  j["images"] = Json::array();
  for (const auto& i : spec.images) j["images"].push_back({{"site", i.site}, {"count", i.count}});
  return j;
}

PlantSpec default_spec(std::uint64_t seed) {
  Rng rng(seed);
  PlantSpec spec;
  spec.rng_seed = seed;
  spec.stateful_crawls = 3;
  spec.background_requests = 6;
  spec.decoys = true;

  const std::vector<std::pair<Leaning, std::vector<std::string>>> roster = {
      {Leaning::kLeft, {"bluewave-post.com", "progressive-daily.org", "the-commons.news", "leftfield-times.com",
                        "harbor-tribune.co.uk", "civic-ledger.com", "open-voice.com.au"}},
      {Leaning::kCentre, {"middle-ground.com", "plain-record.org", "daily-median.co.uk", "the-balance.news",
                          "civil-gazette.com", "neutral-wire.com"}},
      {Leaning::kRight, {"redline-report.com", "liberty-herald.org", "patriot-journal.news", "heritage-wire.com",
                         "frontier-sentinel.co.uk", "ironclad-times.com", "free-standard.com.au"}},
  };
  std::vector<std::string> sites;
  for (const auto& [leaning, names] : roster) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      SiteLabel l;
      l.site_id = names[i];
      l.leaning = leaning;
      l.display_name = names[i].substr(0, names[i].find('.'));
      l.followers = static_cast<std::int64_t>(rng.between(20'000, 5'000'000));
      spec.sites.push_back(l);
      sites.push_back(names[i]);
      if (i < 2) {
        l.platform = Platform::kMobile;
        spec.sites.push_back(l);
      }
    }
  }

  const std::vector<std::string> ad = {"doubleclick.net", "adnexus-exchange.com", "bidstream.net", "clickgrid.io",
                                       "admatrix.com", "yieldpath.net", "pubsignal.com"};
  const std::vector<std::string> analytics = {"metricflow.com", "statbeam.io", "tagpulse.net", "google-analytics.com"};
  const std::vector<std::string> social = {"sharebar.com", "likewidget.net"};
  const std::vector<std::string> beacons = {"beaconhub.com", "pixelrelay.net", "trackdot.io", "doubleclick.net", "metricflow.com"};
  const std::vector<std::string> fp_vendors = {"fpjs-cdn.com", "devicecheck.net"};
  std::vector<std::string> trackers = ad;
  trackers.insert(trackers.end(), analytics.begin(), analytics.end());
  trackers.insert(trackers.end(), social.begin(), social.end());

  for (const auto& l : spec.sites) {
    CookiePlan c;
    c.site = l.site_id;
    c.platform = l.platform;
    const bool mobile = l.platform == Platform::kMobile;
    c.first_party = mobile ? rng.between(2, 5) : rng.between(3, 8);
    std::vector<std::string> pool = trackers;
    rng.shuffle(pool);
    const std::size_t n = mobile ? rng.between(2, 4) : rng.between(3, 7);
    for (std::size_t i = 0; i < n; ++i) c.third_party[pool[i]] = rng.between(1, 3);
    spec.cookies.push_back(std::move(c));
  }

  const std::vector<std::string> cookie_names = {"uid", "_uid", "id", "tuid", "IDE", "anj", "_cid"};
  std::vector<std::string> id_owners = ad;
  id_owners.push_back("metricflow.com");
  id_owners.push_back("statbeam.io");
  for (std::size_t i = 0; i < id_owners.size(); ++i) {
    IdPlan p;
    p.origin = id_owners[i];
    p.name = "uid@" + p.origin;
    p.cookie_name = cookie_names[i % cookie_names.size()];
    p.token_length = i == 0 ? 11 : rng.between(12, 36);
    for (const auto& s : sites)
      if (rng.chance(0.7)) p.carriers.push_back(s);
    if (p.carriers.empty()) p.carriers.push_back(sites[i % sites.size()]);
    spec.ids.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string& s = sites[i * 5];
    spec.ids.push_back({"fpid@" + s, s, "_fpid", rng.between(16, 40), {s}});
  }

  auto channel_draw = [&] {
    const double x = static_cast<double>(rng.below(100));
    return x < 50 ? SyncChannel::kRequestUrl : (x < 75 ? SyncChannel::kReferrer : SyncChannel::kRedirectLocation);
  };
  std::vector<std::string> receivers = ad;
  receivers.insert(receivers.end(), analytics.begin(), analytics.end());
  for (const auto& s : sites) {
    std::vector<const IdPlan*> carried;
    for (const auto& id : spec.ids)
      if (std::find(id.carriers.begin(), id.carriers.end(), s) != id.carriers.end()) carried.push_back(&id);
    if (carried.empty()) continue;
    const std::size_t n = rng.between(2, 5);
    for (std::size_t k = 0; k < n; ++k) {
      const IdPlan& id = *carried[rng.below(carried.size())];
      SyncPlan p;
      p.site = s;
      p.id = id.name;
      p.channel = channel_draw();
      p.percent_encoded = rng.chance(0.2);
      do p.receiver = rng.pick(receivers);
      while (p.receiver == id.origin);
      const bool fp_id = id.origin == s;
      const double roll = static_cast<double>(rng.below(100));
      if (roll < 20 && p.channel == SyncChannel::kRequestUrl) {
        p.sender.reset();
      } else if (fp_id) {
        p.sender = s;
      } else if (roll < 80) {
        p.sender = id.origin;
      } else {
        std::string other;
        do other = rng.pick(receivers);
        while (other == p.receiver);
        p.sender = other;
      }
      spec.syncs.push_back(std::move(p));
    }
  }

  auto script_domain = [&](const std::string& s) { return rng.chance(0.3) ? s : rng.pick(fp_vendors); };
  std::vector<std::string> order = sites;
  rng.shuffle(order);
  for (std::size_t i = 0; i < 8; ++i) spec.fingerprints.push_back({order[i], script_domain(order[i]), {FingerprintKind::kCanvas}});
  for (std::size_t i = 6; i < 10; ++i) spec.fingerprints.push_back({order[i], script_domain(order[i]), {FingerprintKind::kWebRtc}});
  for (std::size_t i = 9; i < 12; ++i)
    spec.fingerprints.push_back({order[i], script_domain(order[i]), {FingerprintKind::kAudioContext}});
  spec.fingerprints.push_back({order[12], "fpjs-cdn.com", {FingerprintKind::kCanvas, FingerprintKind::kAudioContext}});

  const ImageFormat formats[] = {ImageFormat::kGif, ImageFormat::kPng, ImageFormat::kJpeg, ImageFormat::kWebp, ImageFormat::kBmp};
  for (const auto& s : sites) {
    const std::size_t plans = rng.between(1, 3);
    std::vector<std::string> pool = beacons;
    rng.shuffle(pool);
    for (std::size_t i = 0; i < plans; ++i) spec.pixels.push_back({s, pool[i], rng.between(1, 6), formats[rng.below(5)]});
    spec.images.push_back({s, rng.between(4, 8)});
  }
  return spec;
}

Json to_json(const GroundTruth& truth) {
  Json j;
  j["ids"] = Json::array();
  for (const auto& id : truth.ids)
    j["ids"].push_back({{"token", id.token},
                        {"origin_domain", id.origin_domain},
                        {"cookie_name", id.cookie_name},
                        {"first_seen", id.first_seen},
                        {"crawl_ids", id.crawl_ids}});
  j["syncs"] = Json::array();
  for (const auto& e : truth.syncs) j["syncs"].push_back(to_json(e));
  j["fingerprints"] = Json::array();
  for (const auto& f : truth.fingerprints)
    j["fingerprints"].push_back(
        {{"visit_id", f.visit_id}, {"site_id", f.site_id}, {"script_url", f.script_url}, {"kind", to_string(f.kind)}});
  j["pixels"] = Json::array();
  for (const auto& p : truth.pixels)
    j["pixels"].push_back({{"visit_id", p.visit_id},
                           {"site_id", p.site_id},
                           {"event_id", p.event_id},
                           {"image_url", p.image_url},
                           {"setter_domain", p.setter_domain}});
  j["image_responses"] = truth.image_responses;
  j["undecodable"] = truth.undecodable;
  j["cookies"] = Json::array();
  for (const auto& c : truth.cookies)
    j["cookies"].push_back({{"visit_id", c.visit_id},
                            {"site_id", c.site_id},
                            {"platform", to_string(c.platform)},
                            {"cookie_count", c.cookie_count},
                            {"tp_count", c.tp_count}});
  j["decoys"] = truth.decoys;
  return j;
}

SynthOutput generate(const PlantSpec& spec) {
  check_spec(spec);
  SynthOutput out;
  GroundTruth& truth = out.truth;
  Rng rng(spec.rng_seed);
  Context ctx{spec, {}, {}, {}, truth};

  std::set<std::string> used;
  auto fresh = [&](std::size_t len) {
    std::string t;
    do t = make_token(rng, len);
    while (!used.insert(t).second);
    return t;
  };
  for (const auto& id : spec.ids) {
    ctx.id_tokens[id.name] = fresh(id.token_length);
    ctx.id_plans[id.name] = &id;
  }

  std::vector<const SiteLabel*> desktop, mobile;
  for (const auto& s : spec.sites) (s.platform == Platform::kDesktop ? desktop : mobile).push_back(&s);
  if (spec.decoys) {
    for (const auto* s : desktop) {
      auto& t = ctx.decoy_tokens[s->site_id];
      t["short_token"] = fresh(10);
      t["short_lifetime"] = fresh(16);
      t["lifetime_boundary"] = fresh(18);
      t["single_crawl"] = fresh(20);
      t["session_cookie"] = fresh(24);
      t["malformed_expiry"] = fresh(24);
      t["long_token"] = fresh(129);
    }
  }

  auto cookie_plan = [&](const std::string& site, Platform platform) -> const CookiePlan* {
    for (const auto& c : spec.cookies)
      if (c.site == site && c.platform == platform) return &c;
    return nullptr;
  };
  auto plant_cookies = [&](Visit& v, const std::string& site, Platform platform, std::int64_t start) {
    if (const CookiePlan* plan = cookie_plan(site, platform)) {
      for (std::size_t i = 0; i < plan->first_party; ++i) {
        std::optional<std::int64_t> life;
        if (i % 3 != 0) life = static_cast<std::int64_t>(rng.between(1, 730)) * kDayMs;
        v.cookie(i % 2 ? "www." + site : site, "fp" + std::to_string(i), hex_string(rng, rng.between(1, 8)), life, false, start);
      }
      for (const auto& [domain, n] : plan->third_party)
        for (std::size_t i = 0; i < n; ++i)
          v.cookie(domain, "c" + std::to_string(i), hex_string(rng, rng.between(1, 10)),
                   static_cast<std::int64_t>(rng.between(1, 400)) * kDayMs, domain != site, start);
    }
  };

  std::map<std::string, UserId> id_truth;
  for (int crawl = 0; crawl < spec.stateful_crawls; ++crawl) {
    const std::string crawl_id = "stateful-" + std::to_string(crawl + 1);
    const std::int64_t crawl_start = kEpochMs + crawl * 9 * kDayMs;
    std::vector<const SiteLabel*> order = desktop;
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const SiteLabel& site = *order[pos];
      const std::string& s = site.site_id;
      CrawlTrace t;
      t.visit_id = crawl_id + "/" + s;
      t.site = site;
      t.crawl_id = crawl_id;
      t.crawl_mode = CrawlMode::kStateful;
      t.visit_order = static_cast<int>(pos);
      const std::int64_t start = crawl_start + static_cast<std::int64_t>(pos) * 180'000;
      Visit v{t, start, rng};

      plant_cookies(v, s, Platform::kDesktop, start);
      for (const auto& id : spec.ids) {
        if (std::find(id.carriers.begin(), id.carriers.end(), s) == id.carriers.end()) continue;
        const std::string host = id.origin == s ? "www." + s : id.origin;
        v.cookie(host, id.cookie_name, ctx.id_tokens[id.name], 395 * kDayMs, id.origin != s, start);
        auto [it, inserted] = id_truth.try_emplace(id.name);
        UserId& u = it->second;
        if (inserted) {
          u = {ctx.id_tokens[id.name], id.origin, id.cookie_name, start, {}};
        }
        u.first_seen = std::min(u.first_seen, start);
        u.crawl_ids.insert(crawl_id);
      }

      const std::string page = page_url(s);
      v.request(page, std::nullopt);
      v.response(page, 200, "text/html; charset=utf-8", std::nullopt, nullptr);
      std::vector<Unit> units;
      desktop_units(ctx, site, crawl, start, units);
      rng.shuffle(units);
      for (auto& u : units) u(v);

      truth.cookies.push_back({t.visit_id, s, Platform::kDesktop, v.cookie_count, v.tp_count});
      out.traces.push_back(std::move(t));
    }
  }

  std::vector<const SiteLabel*> order = mobile;
  rng.shuffle(order);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const SiteLabel& site = *order[pos];
    CrawlTrace t;
    t.visit_id = "mobile-1/" + site.site_id;
    t.site = site;
    t.crawl_id = "mobile-1";
    t.crawl_mode = CrawlMode::kStateless;
    t.visit_order = static_cast<int>(pos);
    const std::int64_t start = kEpochMs + 40 * kDayMs + static_cast<std::int64_t>(pos) * 180'000;
    Visit v{t, start, rng};
    plant_cookies(v, site.site_id, Platform::kMobile, start);
    truth.cookies.push_back({t.visit_id, site.site_id, Platform::kMobile, v.cookie_count, v.tp_count});
    out.traces.push_back(std::move(t));
  }

  for (auto& [name, u] : id_truth) truth.ids.push_back(u);
  std::sort(truth.ids.begin(), truth.ids.end(), [](const UserId& a, const UserId& b) {
    return std::tie(a.token, a.origin_domain, a.cookie_name) < std::tie(b.token, b.origin_domain, b.cookie_name);
  });
  std::sort(truth.syncs.begin(), truth.syncs.end(), [](const SyncEvent& a, const SyncEvent& b) {
    return std::tie(a.visit_site, a.visit_id, a.evidence_event_id, a.channel, a.token) <
           std::tie(b.visit_site, b.visit_id, b.evidence_event_id, b.channel, b.token);
  });
  std::sort(truth.fingerprints.begin(), truth.fingerprints.end(), [](const TruthFingerprint& a, const TruthFingerprint& b) {
    return std::tie(a.site_id, a.visit_id, a.script_url, a.kind) < std::tie(b.site_id, b.visit_id, b.script_url, b.kind);
  });
  std::sort(truth.pixels.begin(), truth.pixels.end(), [](const TruthPixel& a, const TruthPixel& b) {
    return std::tie(a.site_id, a.visit_id, a.event_id) < std::tie(b.site_id, b.visit_id, b.event_id);
  });
  std::sort(truth.cookies.begin(), truth.cookies.end(), [](const TruthVisitCookies& a, const TruthVisitCookies& b) {
    return std::tie(a.site_id, a.platform, a.visit_id) < std::tie(b.site_id, b.platform, b.visit_id);
  });
  return out;
}

}  // namespace tracklens
