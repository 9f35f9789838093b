#include "url.hpp"

#include <cctype>

#include "strings.hpp"

namespace tracklens {

namespace {

bool valid_host_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '-' || c == '.' || c == '_' || u >= 0x80;
}

}  // namespace

std::optional<Url> parse_http_url(std::string_view text) {
  const auto sep = text.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  Url url;
  url.scheme = to_lower_ascii(text.substr(0, sep));
  if (url.scheme != "http" && url.scheme != "https") return std::nullopt;

  std::string_view rest = text.substr(sep + 3);
  const auto authority_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, authority_end);
  std::string_view tail =
      authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);

  if (const auto at = authority.rfind('@'); at != std::string_view::npos)
    authority.remove_prefix(at + 1);

  std::string_view host = authority;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    std::string_view after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') return std::nullopt;
      const auto port = parse_int64(after.substr(1));
      if (!port || *port < 0 || *port > 65535) return std::nullopt;
      url.port = static_cast<int>(*port);
    }
  } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    const std::string_view port_text = authority.substr(colon + 1);
    if (!port_text.empty()) {
      const auto port = parse_int64(port_text);
      if (!port || *port < 0 || *port > 65535) return std::nullopt;
      url.port = static_cast<int>(*port);
    }
  }
  if (host.empty()) return std::nullopt;
  if (host.front() != '[') {
    for (char c : host)
      if (!valid_host_char(c)) return std::nullopt;
  }
  url.host = to_lower_ascii(host);

  if (const auto hash = tail.find('#'); hash != std::string_view::npos)
    tail = tail.substr(0, hash);
  if (const auto q = tail.find('?'); q != std::string_view::npos) {
    url.path = std::string(tail.substr(0, q));
    url.query = std::string(tail.substr(q + 1));
  } else {
    url.path = std::string(tail);
  }
  return url;
}

std::string host_of(std::string_view url_or_host) {
  url_or_host = trim(url_or_host);
  if (url_or_host.find("://") != std::string_view::npos) {
    const auto url = parse_http_url(url_or_host);
    return url ? url->host : std::string{};
  }
  std::string_view host = url_or_host;
  if (const auto slash = host.find('/'); slash != std::string_view::npos)
    host = host.substr(0, slash);
  if (!host.empty() && host.front() != '[') {
    const auto colon = host.find(':');
    // A single colon is a port; more than one means a bare IPv6 literal.
    if (colon != std::string_view::npos && host.find(':', colon + 1) == std::string_view::npos)
      host = host.substr(0, colon);
  }
  for (char c : host)
    if (!valid_host_char(c) && c != ':' && c != '[' && c != ']') return {};
  return to_lower_ascii(host);
}

bool is_ip_literal(std::string_view host) {
  if (host.empty()) return false;
  if (host.front() == '[' || host.find(':') != std::string_view::npos) return true;
  const auto parts = split(host, '.');
  if (parts.size() != 4) return false;
  for (auto part : parts) {
    if (part.empty() || part.size() > 3) return false;
    for (char c : part)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    if (*parse_int64(part) > 255) return false;
  }
  return true;
}

}  // namespace tracklens
