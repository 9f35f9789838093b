#include <doctest.h>

#include <algorithm>
#include <random>

#include "pixel.hpp"
#include "support.hpp"
#include "synth.hpp"

using namespace tracklens;
using tltest::psl;
using tltest::TraceBuilder;

namespace {

using Headers = std::vector<std::pair<std::string, std::string>>;

Headers typed(const std::string& type, std::optional<std::size_t> length = std::nullopt) {
  Headers h = {{"Content-Type", type}};
  if (length) h.emplace_back("Content-Length", std::to_string(*length));
  return h;
}

PixelSummary summarize(const std::vector<CrawlTrace>& traces, const LabelSet& labels) {
  return pixel_summary(scan_pixels(traces, psl(), {}), labels);
}

PlantSpec one_crawl(std::vector<SiteLabel> sites) {
  PlantSpec spec;
  spec.stateful_crawls = 1;
  spec.sites = std::move(sites);
  return spec;
}

}  // namespace

TEST_CASE("candidate filter") {
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.response("https://px.a.com/p.png", 200, typed("image/png", 43));
  b.response("https://img.b.com/hero.jpg", 200, typed("image/jpeg", 5000));
  b.response("https://www.news-site.com/frag", 200, typed("text/html", 200));
  b.response("https://px.a.com/q.gif", 200, typed(" Image/GIF "), tltest::gif_1x1());
  b.response("https://px.a.com/none.gif", 200, typed("image/gif"));
  b.response("https://px.a.com/edge.gif", 200, typed("image/gif", 1024));
  b.response("https://px.a.com/edge2.gif", 200, typed("image/gif", 1023));
  const std::vector<CrawlTrace> traces = {b.build()};
  const auto c = filter_image_events(traces, {});
  REQUIRE(c.size() == 3);
  CHECK(c[0].image_url == "https://px.a.com/p.png");
  CHECK(c[0].content_length == 43);
  CHECK(c[1].content_length == 43);
  CHECK(c[2].image_url == "https://px.a.com/edge2.gif");

  PixelOptions wide;
  wide.size_cap = 100 * 1024;
  CHECK(filter_image_events(traces, wide).size() == 5);
}

TEST_CASE("scan classifies only decodable 1x1 images") {
  TraceBuilder b(tltest::label("news-site.com", Leaning::kLeft));
  b.response("https://px.tracker.com/b.gif", 200, typed("image/gif", 43), tltest::gif_1x1());
  b.response("https://www.news-site.com/b.gif", 200, typed("image/gif"), tltest::gif_1x1());
  b.response("https://px.tracker.com/two.png", 200, typed("image/png"), synth_image(ImageFormat::kPng, 2, 2));
  b.response("https://px.tracker.com/headonly.gif", 200, typed("image/gif", 43));
  b.response("https://px.tracker.com/junk.gif", 200, typed("image/gif"), std::vector<std::uint8_t>{1, 2, 3});
  b.response("https://img.tracker.com/big.jpg", 200, typed("image/jpeg", 40000));
  const auto scan = scan_pixels(std::vector<CrawlTrace>{b.build()}, psl(), {});
  CHECK(scan.image_responses == 6);
  CHECK(scan.candidates == 5);
  CHECK(scan.undecodable == 2);
  REQUIRE(scan.findings.size() == 2);
  CHECK(scan.findings[0].setter_domain == "tracker.com");
  CHECK(scan.findings[0].party == Party::kThirdParty);
  CHECK(scan.findings[1].setter_domain == "news-site.com");
  CHECK(scan.findings[1].party == Party::kFirstParty);
  for (const auto& f : scan.findings) {
    CHECK(f.width == 1);
    CHECK(f.height == 1);
    CHECK(f.content_length < 1024);
    CHECK(f.format == ImageFormat::kGif);
  }
}

TEST_CASE("fraction arithmetic") {
  // 2513 pixels among 11582 images.
  PlantSpec spec = one_crawl({tltest::label("bignews.com", Leaning::kRight)});
  spec.pixels.push_back({"bignews.com", "pixelhub.com", 2513, ImageFormat::kGif});
  spec.images.push_back({"bignews.com", 11582 - 2513});
  const auto synth = generate(spec);
  const auto s = summarize(synth.traces, LabelSet(spec.sites));
  CHECK(s.image_responses == 11582);
  CHECK(s.findings == 2513);
  CHECK(s.fraction == doctest::Approx(2513.0 / 11582.0));
  CHECK(format_fixed(s.fraction, 3) == "0.217");
  CHECK(s.findings == synth.truth.pixels.size());
  CHECK(s.undecodable == synth.truth.undecodable);
}

TEST_CASE("per-leaning medians and the top site") {
  std::vector<SiteLabel> sites;
  const std::map<Leaning, std::vector<std::size_t>> planted = {
      {Leaning::kLeft, {3, 12, 40, 12, 7}}, {Leaning::kRight, {10, 2, 261, 11}}, {Leaning::kCentre, {15, 16, 1}}};
  PlantSpec spec;
  spec.stateful_crawls = 1;
  for (const auto& [l, counts] : planted)
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const std::string site = std::string(to_string(l)) + std::to_string(i) + ".com";
      spec.sites.push_back(tltest::label(site, l));
      spec.pixels.push_back({site, "beacon" + std::to_string(i % 3) + ".net", counts[i], ImageFormat::kPng});
      spec.images.push_back({site, 5});
    }
  const auto s = summarize(generate(spec).traces, LabelSet(spec.sites));
  CHECK(s.median_per_site.at(Leaning::kLeft) == 12);
  CHECK(s.median_per_site.at(Leaning::kRight) == 10);
  CHECK(s.median_per_site.at(Leaning::kCentre) == 15);
  REQUIRE_FALSE(s.sites.empty());
  CHECK(s.sites[0].pixels == 261);
  CHECK(s.sites[0].leaning == Leaning::kRight);
  CHECK(s.distinct_tps == 3);
  std::size_t tp_total = 0;
  for (const auto& row : s.top_tps) tp_total += row.pixels;
  CHECK(tp_total == s.findings);
}

TEST_CASE("per-site count is the median over crawls") {
  std::vector<CrawlTrace> traces;
  const std::size_t per_crawl[] = {4, 9, 1};
  for (int c = 0; c < 3; ++c) {
    TraceBuilder b(tltest::label("a.com", Leaning::kLeft), "stateful-" + std::to_string(c + 1));
    for (std::size_t k = 0; k < per_crawl[c]; ++k) b.response("https://px.t.com/" + std::to_string(k), 200, typed("image/gif"), tltest::gif_1x1());
    traces.push_back(b.build());
  }
  const auto s = summarize(traces, LabelSet({tltest::label("a.com", Leaning::kLeft)}));
  CHECK(s.sites.at(0).pixels == 4);
  CHECK(s.findings == 14);
}

TEST_CASE("errors") {
  TraceBuilder b(tltest::label("a.com", Leaning::kLeft));
  b.response("https://www.a.com/", 200, typed("text/html"));
  const std::vector<CrawlTrace> none = {b.build()};
  CHECK(tltest::error_code_of([&] { summarize(none, LabelSet({tltest::label("a.com", Leaning::kLeft)})); }) ==
        ErrorCode::kInvalidArgument);
  b.response("https://px.t.com/1", 200, typed("image/gif"), tltest::gif_1x1());
  const std::vector<CrawlTrace> one = {b.build()};
  CHECK(tltest::error_code_of([&] { summarize(one, LabelSet({tltest::label("b.com", Leaning::kLeft)})); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("summary is invariant under trace order") {
  const auto synth = generate(default_spec(3));
  const LabelSet labels(default_spec(3).sites);
  const auto base = summarize(synth.traces, labels);
  auto traces = synth.traces;
  std::mt19937 rng(6);
  std::shuffle(traces.begin(), traces.end(), rng);
  const auto scan = scan_pixels(traces, psl(), {}, 3);
  const auto s = pixel_summary(scan, labels);
  CHECK(s.fraction == base.fraction);
  CHECK(s.median_per_site == base.median_per_site);
  CHECK(s.distinct_tps == base.distinct_tps);
  REQUIRE(s.sites.size() == base.sites.size());
  for (std::size_t i = 0; i < s.sites.size(); ++i) CHECK(s.sites[i].site_id == base.sites[i].site_id);
  CHECK(scan.findings == scan_pixels(synth.traces, psl(), {}, 1).findings);
}
