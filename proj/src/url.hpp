#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace tracklens {

struct Url {
  std::string scheme;  // lowercase
  std::string host;    // lowercase, IPv6 literals keep their brackets
  std::optional<int> port;
  std::string path;    // includes the leading '/', may be empty
  std::string query;   // without the '?'
};

// Accepts absolute http(s) URLs only; anything else yields nullopt.
std::optional<Url> parse_http_url(std::string_view text);

// Host of an absolute URL, or the input itself (lowercased, port stripped)
// when it is already a bare hostname. Empty on failure.
std::string host_of(std::string_view url_or_host);

bool is_ip_literal(std::string_view host);

}  // namespace tracklens
