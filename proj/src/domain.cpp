#include "domain.hpp"

#include <vector>

#include "error.hpp"
#include "strings.hpp"
#include "url.hpp"

namespace tracklens {

namespace {

std::optional<std::u32string> decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      len = 4;
    } else {
      return std::nullopt;
    }
    if (i + len > s.size()) return std::nullopt;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return std::nullopt;
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

// Bootstring parameters for punycode.
constexpr std::uint32_t kBase = 36, kTMin = 1, kTMax = 26, kSkew = 38, kDamp = 700;
constexpr std::uint32_t kInitialBias = 72, kInitialN = 128;

char encode_digit(std::uint32_t d) {
  return static_cast<char>(d < 26 ? 'a' + d : '0' + (d - 26));
}

std::uint32_t adapt(std::uint32_t delta, std::uint32_t num_points, bool first) {
  delta = first ? delta / kDamp : delta / 2;
  delta += delta / num_points;
  std::uint32_t k = 0;
  while (delta > ((kBase - kTMin) * kTMax) / 2) {
    delta /= kBase - kTMin;
    k += kBase;
  }
  return k + (kBase - kTMin + 1) * delta / (delta + kSkew);
}

std::vector<std::string> ascii_labels_of(std::string_view host) {
  std::vector<std::string> labels;
  for (auto part : split(host, '.')) {
    auto ascii = label_to_ascii(part);
    if (!ascii) return {};
    labels.push_back(std::move(*ascii));
  }
  return labels;
}

}  // namespace

std::optional<std::string> label_to_ascii(std::string_view utf8_label) {
  bool all_ascii = true;
  for (char c : utf8_label)
    if (static_cast<unsigned char>(c) >= 0x80) all_ascii = false;
  if (all_ascii) return to_lower_ascii(utf8_label);

  auto decoded = decode_utf8(utf8_label);
  if (!decoded) return std::nullopt;
  std::u32string input = std::move(*decoded);
  for (auto& cp : input)
    if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';

  std::string output;
  for (char32_t cp : input)
    if (cp < 0x80) output.push_back(static_cast<char>(cp));
  const std::uint32_t basic = static_cast<std::uint32_t>(output.size());
  std::uint32_t handled = basic;
  if (basic > 0) output.push_back('-');

  std::uint32_t n = kInitialN, delta = 0, bias = kInitialBias;
  const auto total = static_cast<std::uint32_t>(input.size());
  while (handled < total) {
    char32_t m = 0x10FFFF + 1;
    for (char32_t cp : input)
      if (cp >= n && cp < m) m = cp;
    delta += (static_cast<std::uint32_t>(m) - n) * (handled + 1);
    n = static_cast<std::uint32_t>(m);
    for (char32_t cp : input) {
      if (cp < n) ++delta;
      if (cp == n) {
        std::uint32_t q = delta;
        for (std::uint32_t k = kBase;; k += kBase) {
          const std::uint32_t t = k <= bias ? kTMin : (k >= bias + kTMax ? kTMax : k - bias);
          if (q < t) break;
          output.push_back(encode_digit(t + (q - t) % (kBase - t)));
          q = (q - t) / (kBase - t);
        }
        output.push_back(encode_digit(q));
        bias = adapt(delta, handled + 1, handled == basic);
        delta = 0;
        ++handled;
      }
    }
    ++delta;
    ++n;
  }
  return "xn--" + output;
}

SuffixSet SuffixSet::parse(std::string_view list_text) {
  SuffixSet set;
  bool in_private = false;
  for (auto raw_line : split(list_text, '\n')) {
    std::string_view line = trim(raw_line);
    if (line.empty()) continue;
    if (line.substr(0, 2) == "//") {
      if (line.find("===BEGIN PRIVATE DOMAINS===") != std::string_view::npos) in_private = true;
      if (line.find("===END PRIVATE DOMAINS===") != std::string_view::npos) in_private = false;
      continue;
    }
    // A rule ends at the first whitespace.
    if (const auto ws = line.find_first_of(" \t"); ws != std::string_view::npos)
      line = line.substr(0, ws);

    std::uint8_t bit = kNormal;
    if (line.front() == '!') {
      bit = kException;
      line.remove_prefix(1);
    } else if (line.substr(0, 2) == "*.") {
      bit = kWildcard;
      line.remove_prefix(2);
    }
    const auto labels = ascii_labels_of(line);
    if (labels.empty()) continue;
    std::string key;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i) key.push_back('.');
      key += labels[i];
    }
    RuleInfo& info = set.rules_[key];
    info.bits |= bit;
    info.is_private = in_private;
    ++set.rule_count_;
  }
  if (set.rule_count_ == 0) throw Error(ErrorCode::kFormat, "public suffix list has no rules");
  return set;
}

SuffixSet SuffixSet::load(const std::string& path) { return parse(read_file(path)); }

SuffixSet::SuffixMatch SuffixSet::match(const std::vector<std::string>& labels) const {
  // Walk suffixes from the longest candidate down; record the best normal or
  // wildcard match and let any exception rule override.
  SuffixMatch best;  // implicit "*" rule: one label
  bool matched = false;
  std::string suffix;
  const std::size_t n = labels.size();
  for (std::size_t count = 1; count <= n; ++count) {
    const std::string& label = labels[n - count];
    suffix = count == 1 ? label : label + "." + suffix;
    const auto it = rules_.find(suffix);
    if (it != rules_.end()) {
      const RuleInfo& info = it->second;
      if (info.bits & kException) return {count - 1, info.is_private};
      if ((info.bits & kNormal) && (!matched || count > best.labels)) {
        best = {count, info.is_private};
        matched = true;
      }
      // Exceptions to a wildcard sit one label deeper and are caught on the
      // next iteration.
      if ((info.bits & kWildcard) && count < n && (!matched || count + 1 > best.labels)) {
        best = {count + 1, info.is_private};
        matched = true;
      }
    }
  }
  return best;
}

std::string SuffixSet::registrable_domain(std::string_view url_or_host) const {
  std::string host = host_of(url_or_host);
  if (host.empty())
    throw Error(ErrorCode::kInvalidArgument, "unparseable host in '" + std::string(url_or_host) + "'");
  if (is_ip_literal(host) || host == "localhost") return host;
  if (host.back() == '.') host.pop_back();
  if (host.empty() || host.front() == '.' || host.find("..") != std::string::npos)
    throw Error(ErrorCode::kInvalidArgument, "empty label in host '" + host + "'");

  const auto original = split(host, '.');
  const auto ascii = ascii_labels_of(host);
  if (ascii.size() != original.size())
    throw Error(ErrorCode::kInvalidArgument, "invalid label encoding in host '" + host + "'");

  const SuffixMatch m = match(ascii);
  if (m.labels >= original.size())
    throw Error(ErrorCode::kInvalidArgument, "no registrable domain: '" + host + "' is a public suffix");
  std::string out;
  for (std::size_t i = original.size() - m.labels - 1; i < original.size(); ++i) {
    if (!out.empty()) out.push_back('.');
    out += original[i];
  }
  return out;
}

std::optional<std::string> SuffixSet::try_registrable_domain(std::string_view url_or_host) const noexcept {
  try {
    return registrable_domain(url_or_host);
  } catch (...) {
    return std::nullopt;
  }
}

bool SuffixSet::suffix_is_private(std::string_view host_in) const {
  const std::string host = host_of(host_in);
  const auto ascii = ascii_labels_of(host);
  if (ascii.empty()) return false;
  return match(ascii).is_private;
}

std::string_view to_string(Party p) {
  return p == Party::kFirstParty ? "first_party" : "third_party";
}

Party classify_party(const SuffixSet& suffixes, std::string_view url_or_host,
                     std::string_view top_level_site) {
  return suffixes.registrable_domain(url_or_host) == suffixes.registrable_domain(top_level_site)
             ? Party::kFirstParty
             : Party::kThirdParty;
}

}  // namespace tracklens
