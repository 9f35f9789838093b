#include <doctest.h>

#include <fstream>
#include <regex>

#include "domain.hpp"
#include "support.hpp"

using namespace tracklens;
using tltest::psl;

namespace {

struct PslCase {
  std::string input;
  std::optional<std::string> expected;
};

// checkPublicSuffix('input', 'expected' | null) lines. Commented-out rows and
// null inputs are skipped. Unicode inputs keep their spelling in the output.
std::vector<PslCase> psl_cases() {
  std::ifstream in(tltest::fixture_path("psl/test_psl.txt"));
  REQUIRE(in);
  const std::regex line_re(R"(checkPublicSuffix\((null|'([^']*)'),\s*(null|'([^']*)')\);)");
  std::vector<PslCase> out;
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (line.rfind("//", 0) == 0 || !std::regex_search(line, m, line_re) || m[1] == "null") continue;
    PslCase c{m[2].str(), std::nullopt};
    if (m[3] != "null") c.expected = m[4].str();
    out.push_back(std::move(c));
  }
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST_CASE("public suffix test vectors") {
  const auto cases = psl_cases();
  CHECK(cases.size() == 77);
  for (const auto& c : cases) {
    CAPTURE(c.input);
    const auto got = psl().try_registrable_domain(c.input);
    if (c.expected) {
      REQUIRE(got);
      CHECK(*got == lower(*c.expected));
    } else {
      CHECK_FALSE(got);
    }
  }
}

TEST_CASE("registrable domain examples") {
  CHECK(psl().registrable_domain("https://rtb.gumgum.com/path") == "gumgum.com");
  CHECK(psl().registrable_domain("example.com") == "example.com");
  CHECK(psl().registrable_domain("a.b.co.uk") == "b.co.uk");
  CHECK(psl().registrable_domain("http://192.168.1.20:8080/x") == "192.168.1.20");
  CHECK(psl().registrable_domain("localhost") == "localhost");
  CHECK(tltest::error_code_of([] { psl().registrable_domain("co.uk"); }) == ErrorCode::kInvalidArgument);
  CHECK(tltest::error_code_of([] { psl().registrable_domain("https:///nohost"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("registrable domain is idempotent and one label above the suffix") {
  const char* hosts[] = {"rtb.gumgum.com", "a.b.c.example.co.uk", "x.y.kyoto.jp", "deep.sub.blogspot.com",
                         "www.bbc.co.uk", "cdn.adnexus-exchange.com", "m.timesofindia.com"};
  for (const char* h : hosts) {
    CAPTURE(h);
    const auto d = psl().registrable_domain(h);
    CHECK(psl().registrable_domain(d) == d);
    const std::string host = h;
    REQUIRE(host.size() >= d.size());
    CHECK(host.compare(host.size() - d.size(), d.size(), d) == 0);
    CHECK((host.size() == d.size() || host[host.size() - d.size() - 1] == '.'));
    // Dropping the first label of the result leaves a public suffix.
    const auto rest = d.substr(d.find('.') + 1);
    CHECK_FALSE(psl().try_registrable_domain(rest));
  }
}

TEST_CASE("private section rules are flagged") {
  CHECK(psl().suffix_is_private("foo.blogspot.com"));
  CHECK_FALSE(psl().suffix_is_private("foo.example.com"));
}

TEST_CASE("party classification") {
  CHECK(classify_party(psl(), "cdn.ndtv.com", "ndtv.com") == Party::kFirstParty);
  CHECK(classify_party(psl(), "doubleclick.net", "ndtv.com") == Party::kThirdParty);
  CHECK(classify_party(psl(), "https://m.timesofindia.com/a", "timesofindia.com") == Party::kFirstParty);
  CHECK(to_string(Party::kThirdParty) != to_string(Party::kFirstParty));
}

TEST_CASE("suffix rules parse wildcard and exception lines") {
  const auto s = SuffixSet::parse("// comment\ncom\n*.ck\n!www.ck\n\n// ===BEGIN PRIVATE DOMAINS===\nhost.com\n");
  CHECK(s.rule_count() == 4);
  CHECK(s.registrable_domain("a.b.test.ck") == "b.test.ck");
  CHECK(s.registrable_domain("www.www.ck") == "www.ck");
  CHECK(s.registrable_domain("x.y.host.com") == "y.host.com");
  CHECK(s.suffix_is_private("y.host.com"));
}

TEST_CASE("label punycode") {
  CHECK(label_to_ascii("食狮") == "xn--85x722f");
  CHECK(label_to_ascii("中国") == "xn--fiqs8s");
  CHECK(label_to_ascii("MiXeD") == "mixed");
  CHECK_FALSE(label_to_ascii("\xff\xfe"));
}
