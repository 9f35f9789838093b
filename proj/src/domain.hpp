#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tracklens {

// Public suffix rules (normal, "*." wildcard, "!" exception). Rules are stored
// in ASCII (punycode) form so Unicode and xn-- spellings of a host resolve the
// same way.
class SuffixSet {
 public:
  static SuffixSet parse(std::string_view list_text);
  static SuffixSet load(const std::string& path);

  std::size_t rule_count() const { return rule_count_; }

  // eTLD+1 of a URL or bare host. IP literals and "localhost" come back
  // verbatim. Throws kInvalidArgument for unparseable hosts and for hosts
  // that are themselves a public suffix.
  std::string registrable_domain(std::string_view url_or_host) const;
  std::optional<std::string> try_registrable_domain(std::string_view url_or_host) const noexcept;

  // Whether the rule deciding the suffix of `host` sits in the private
  // section of the list.
  bool suffix_is_private(std::string_view host) const;

 private:
  enum RuleBits : std::uint8_t { kNormal = 1, kWildcard = 2, kException = 4 };
  struct RuleInfo {
    std::uint8_t bits = 0;
    bool is_private = false;
  };
  struct SuffixMatch {
    std::size_t labels = 1;
    bool is_private = false;
  };

  SuffixMatch match(const std::vector<std::string>& ascii_labels) const;

  std::unordered_map<std::string, RuleInfo> rules_;
  std::size_t rule_count_ = 0;
};

enum class Party { kFirstParty, kThirdParty };

std::string_view to_string(Party p);

// FirstParty iff both sides share a registrable domain.
Party classify_party(const SuffixSet& suffixes, std::string_view url_or_host,
                     std::string_view top_level_site);

// RFC 3492 encoding of one Unicode label (given as UTF-8); ASCII labels are
// just lowercased. Returns nullopt on invalid UTF-8.
std::optional<std::string> label_to_ascii(std::string_view utf8_label);

}  // namespace tracklens
