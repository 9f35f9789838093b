#include "report.hpp"

#include <algorithm>
#include <set>

#include "error.hpp"
#include "stats.hpp"
#include "strings.hpp"

namespace tracklens {

namespace {

Json cdf_json(std::span<const double> values) {
  Json out = Json::array();
  if (values.empty()) return out;
  for (const auto& p : stats::cdf_series(values)) out.push_back(Json::array({p.x, p.f}));
  return out;
}

Json ks_json(std::span<const double> a, std::span<const double> b) {
  const auto r = stats::ks_test(a, b);
  return {{"statistic", r.statistic}, {"p_value", r.p_value}, {"n_a", a.size()}, {"n_b", b.size()}};
}

// Ratio of lower medians; null when the denominator median is zero.
Json ratio_json(std::span<const double> a, std::span<const double> b) {
  Json out = {{"median_a", stats::median_lower(a)}, {"median_b", stats::median_lower(b)}};
  if (out["median_b"].get<double>() == 0) {
    out["ratio"] = nullptr;
    out["ratio_rounded"] = nullptr;
  } else {
    const double r = stats::median_ratio(a, b);
    out["ratio"] = r;
    out["ratio_rounded"] = stats::round_to(r, 1);
  }
  return out;
}

Json comparison(std::string a, std::string b, std::span<const double> va, std::span<const double> vb) {
  Json c = {{"a", std::move(a)}, {"b", std::move(b)}};
  if (va.empty() || vb.empty()) {
    c["status"] = "empty";
    return c;
  }
  c["ks"] = ks_json(va, vb);
  c.update(ratio_json(va, vb));
  return c;
}

const std::pair<Leaning, Leaning> kLeaningComparisons[] = {
    {Leaning::kCentre, Leaning::kLeft}, {Leaning::kRight, Leaning::kLeft}, {Leaning::kRight, Leaning::kCentre}};

Json section_header(std::string_view name, std::string_view source, const SectionMeta& meta) {
  return {{"section", name},
          {"source", source},
          {"config_hash", meta.config_hash},
          {"schema_version", kReportSchemaVersion},
          {"sites", meta.roster}};
}

std::string fixed(double v) { return format_fixed(v, 6); }

std::string csv_row(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += csv_field(f);
    first = false;
  }
  out += '\n';
  return out;
}

std::string num(const Json& j) {
  if (j.is_null()) return "";
  if (j.is_number_integer() || j.is_number_unsigned()) return std::to_string(j.get<std::int64_t>());
  if (j.is_number()) return fixed(j.get<double>());
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  return j.get<std::string>();
}

}  // namespace

std::vector<std::string> site_roster(std::span<const CrawlTrace> traces) {
  std::set<std::string> ids;
  for (const auto& t : traces) ids.insert(t.site.site_id);
  return {ids.begin(), ids.end()};
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json census_section(const CookieCensus& census, const LabelSet& labels, const CookieShare* share,
                    const BaselineTable* baseline, const SectionMeta& meta, std::size_t top_k) {
  Json out = section_header("census", "cookie-census", meta);

  Json per_site = Json::array();
  for (const auto& s : census.sites) {
    Json crawls = Json::object();
    for (const auto& [crawl, n] : s.crawl_counts) crawls[crawl] = n;
    Json cats = Json::object();
    for (CategoryGroup g : kAllCategoryGroups) {
      auto it = s.category_counts.find(g);
      cats[std::string(to_string(g))] = it == s.category_counts.end() ? 0 : it->second;
    }
    per_site.push_back({{"site_id", s.site_id},
                        {"leaning", to_string(s.leaning)},
                        {"platform", to_string(s.platform)},
                        {"crawl_counts", crawls},
                        {"median_cookies", s.median_cookie_count},
                        {"tp_cookie_domains", s.tp_cookie_domains.size()},
                        {"tp_request_domains", s.tp_request_domains.size()},
                        {"categories", cats}});
  }
  out["per_site"] = std::move(per_site);

  Json medians = Json::object(), cdfs = Json::object(), comparisons = Json::object();
  for (Platform p : {Platform::kDesktop, Platform::kMobile}) {
    const std::string pname(to_string(p));
    std::map<Leaning, std::vector<double>> values;
    for (Leaning l : kAllLeanings) {
      values[l] = census.medians(l, p);
      const std::string lname(to_string(l));
      medians[pname][lname] = values[l].empty() ? Json(nullptr) : Json(stats::median_lower(values[l]));
      cdfs[pname][lname] = cdf_json(values[l]);
    }
    Json rows = Json::array();
    for (const auto& [a, b] : kLeaningComparisons)
      rows.push_back(comparison(std::string(to_string(a)), std::string(to_string(b)), values[a], values[b]));
    comparisons[pname] = std::move(rows);
  }
  out["leaning_medians"] = std::move(medians);
  out["cdf"] = std::move(cdfs);
  out["comparisons"] = std::move(comparisons);

  // Category mix summed per leaning, desktop only.
  Json categories = Json::object();
  for (Leaning l : kAllLeanings) {
    Json cats = Json::object();
    for (CategoryGroup g : kAllCategoryGroups) cats[std::string(to_string(g))] = 0;
    for (const auto& s : census.sites) {
      if (s.leaning != l || s.platform != Platform::kDesktop) continue;
      for (const auto& [g, n] : s.category_counts) {
        auto& slot = cats[std::string(to_string(g))];
        slot = slot.get<std::size_t>() + n;
      }
    }
    categories[std::string(to_string(l))] = std::move(cats);
  }
  out["categories"] = std::move(categories);

  try {
    const auto o = platform_overlap(census);
    out["platform_overlap"] = {{"both", o.both},
                               {"desktop_only", o.desktop_only},
                               {"mobile_only", o.mobile_only},
                               {"union_size", o.union_size},
                               {"sites", o.sites}};
  } catch (const Error&) {
    out["platform_overlap"] = nullptr;
  }

  Json coverage = Json::object();
  for (Presence presence : {Presence::kCookieSetting, Presence::kAnyRequest}) {
    Json groups = Json::object();
    auto one = [&](std::optional<Leaning> group, const std::string& name) {
      std::vector<CoverageRow> rows;
      try {
        rows = tp_coverage(census, labels, group, presence, Platform::kDesktop);
      } catch (const Error&) {
        groups[name] = Json::array();
        return;
      }
      if (baseline) join_baseline(rows, *baseline);
      Json arr = Json::array();
      for (std::size_t i = 0; i < rows.size() && i < top_k; ++i)
        arr.push_back({{"tp_domain", rows[i].tp_domain},
                       {"sites", rows[i].sites},
                       {"coverage", rows[i].coverage},
                       {"baseline", rows[i].baseline ? Json(*rows[i].baseline) : Json(nullptr)}});
      groups[name] = std::move(arr);
    };
    one(std::nullopt, "All");
    for (Leaning l : kAllLeanings) one(l, std::string(to_string(l)));
    coverage[std::string(to_string(presence))] = std::move(groups);
  }
  out["tp_coverage"] = std::move(coverage);
  out["baseline_joined"] = baseline != nullptr;

  if (share) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < share->rows.size() && i < top_k; ++i) {
      const auto& r = share->rows[i];
      rows.push_back({{"tp_domain", r.tp_domain},
                      {"cookies", r.cookies},
                      {"fraction", r.fraction},
                      {"cumulative", r.cumulative}});
    }
    out["cookie_share"] = {{"total_cookies", share->total_cookies},
                           {"top_k", top_k},
                           {"top_k_share", share->top_k_share(top_k)},
                           {"rows", rows}};
  } else {
    out["cookie_share"] = nullptr;
  }

  // Sites crawled on both platforms: per-site median cookies side by side.
  Json md = Json::array();
  for (const auto& s : census.sites) {
    if (s.platform != Platform::kDesktop) continue;
    const SiteCensus* m = census.find(s.site_id, Platform::kMobile);
    if (!m) continue;
    md.push_back({{"site_id", s.site_id},
                  {"leaning", to_string(s.leaning)},
                  {"desktop_median", s.median_cookie_count},
                  {"mobile_median", m->median_cookie_count},
                  {"desktop_tp_domains", s.tp_cookie_domains.size()},
                  {"mobile_tp_domains", m->tp_cookie_domains.size()}});
  }
  out["mobile_desktop"] = std::move(md);
  out["visits"] = census.visits.size();
  return out;
}

Json csync_section(const CsyncAnalysis& a, const CsyncOptions& options, const SectionMeta& meta) {
  Json out = section_header("csync", "csync-detector", meta);
  out["options"] = {{"min_id_len", options.min_id_len},
                    {"max_id_len", options.max_id_len},
                    {"min_cookie_days", options.min_cookie_days},
                    {"min_crawls", options.min_crawls}};
  out["pair_counting"] = "unordered";
  out["ids"] = a.ids.size();
  out["events"] = a.events.size();

  Json table = Json::array();
  for (const auto& m : a.table)
    table.push_back({{"group_pair", m.group_pair},
                     {"website_pairs", m.website_pair_count},
                     {"syncs", m.sync_count},
                     {"unique_ids", m.unique_ids},
                     {"avg_syncs_per_unique_id", m.avg_syncs_per_unique_id},
                     {"tp_tp_syncs", m.tp_tp_syncs},
                     {"tp_tp_domain_pairs", m.tp_tp_domain_pairs},
                     {"avg_syncs_per_tp_tp_pair", m.avg_syncs_per_tp_tp_pair},
                     {"fp_tp_syncs", m.fp_tp_syncs},
                     {"fp_tp_domain_pairs", m.fp_tp_domain_pairs},
                     {"avg_syncs_per_fp_tp_pair", m.avg_syncs_per_fp_tp_pair},
                     {"zero_denominators",
                      {{"unique_ids", m.zero_unique_ids},
                       {"tp_tp_pairs", m.zero_tp_tp_pairs},
                       {"fp_tp_pairs", m.zero_fp_tp_pairs}}}});
  out["table"] = std::move(table);

  Json cdfs = Json::object();
  for (const auto& [name, values] : a.per_pair_avg) cdfs[name] = cdf_json(values);
  out["per_pair_cdf"] = std::move(cdfs);

  Json comparisons = Json::array();
  const auto& order = table_group_pairs();
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto ia = a.per_pair_avg.find(order[i].name());
      const auto ib = a.per_pair_avg.find(order[j].name());
      static const std::vector<double> kNone;
      comparisons.push_back(comparison(order[i].name(), order[j].name(),
                                       ia == a.per_pair_avg.end() ? kNone : ia->second,
                                       ib == a.per_pair_avg.end() ? kNone : ib->second));
    }
  }
  out["comparisons"] = std::move(comparisons);

  const auto& s = a.summary;
  Json top = Json::array();
  for (const auto& t : s.top_tps) {
    Json frac = Json::object();
    for (const auto& [l, f] : t.site_fraction) frac[std::string(to_string(l))] = f;
    top.push_back({{"domain", t.domain},
                   {"total_syncs", t.total_syncs},
                   {"tp_tp_syncs", t.tp_tp_syncs},
                   {"fp_tp_syncs", t.fp_tp_syncs},
                   {"site_fraction", frac}});
  }
  out["summary"] = {{"fp_domains", s.fp_domains},
                    {"fp_syncing", s.fp_syncing},
                    {"fp_fraction_syncing", s.fp_fraction_syncing},
                    {"tp_domains", s.tp_domains},
                    {"tp_syncing", s.tp_syncing},
                    {"tp_fraction_syncing", s.tp_fraction_syncing},
                    {"max_ids_per_domain", {{"domain", s.max_ids_per_domain.first}, {"ids", s.max_ids_per_domain.second}}},
                    {"max_domains_per_id", {{"token", s.max_domains_per_id.first}, {"domains", s.max_domains_per_id.second}}},
                    {"shortest_token", s.shortest_token ? Json(*s.shortest_token) : Json(nullptr)},
                    {"top_tps", top}};
  return out;
}

Json fingerprint_section(std::span<const FingerprintFinding> findings, const FingerprintSummary& summary,
                         const FingerprintOptions& options, const SectionMeta& meta) {
  Json out = section_header("fingerprint", "fingerprint-detector", meta);
  out["options"] = {{"min_canvas_width", options.min_canvas_width},
                    {"min_canvas_height", options.min_canvas_height},
                    {"require_text_before_extract", options.require_text_before_extract},
                    {"require_buffer_read", options.require_buffer_read}};
  auto group = [](const FingerprintGroupStats& g) {
    return Json{{"sites_total", g.sites_total},
                {"sites_flagged", g.sites_flagged},
                {"fraction", g.fraction},
                {"distinct_scripts", g.distinct_scripts},
                {"distinct_domains", g.distinct_domains}};
  };
  Json by_leaning = Json::object();
  for (const auto& [l, g] : summary.by_leaning) by_leaning[std::string(to_string(l))] = group(g);
  out["by_leaning"] = std::move(by_leaning);
  out["overall"] = group(summary.overall);
  Json by_kind = Json::object();
  for (const auto& [k, s] : summary.by_kind)
    by_kind[std::string(to_string(k))] = {{"scripts", s.scripts}, {"sites", s.sites}, {"domains", s.domains}};
  out["by_kind"] = std::move(by_kind);
  out["findings"] = findings.size();
  return out;
}

Json pixel_section(const PixelSummary& s, const PixelOptions& options, const SectionMeta& meta,
                   std::size_t top_sites) {
  Json out = section_header("pixels", "pixel-detector", meta);
  out["size_cap"] = options.size_cap;
  out["image_responses"] = s.image_responses;
  out["findings"] = s.findings;
  out["fraction"] = s.fraction;
  out["undecodable"] = s.undecodable;
  out["pixel_bodies"] = "inline";

  Json med = Json::object();
  for (const auto& [l, m] : s.median_per_site) med[std::string(to_string(l))] = m;
  out["median_per_site"] = std::move(med);

  std::map<Leaning, std::vector<double>> values;
  for (const auto& r : s.sites) values[r.leaning].push_back(static_cast<double>(r.pixels));
  Json cdfs = Json::object();
  for (Leaning l : kAllLeanings) cdfs[std::string(to_string(l))] = cdf_json(values[l]);
  out["cdf"] = std::move(cdfs);
  Json comparisons = Json::array();
  for (const auto& [a, b] : kLeaningComparisons)
    comparisons.push_back(comparison(std::string(to_string(a)), std::string(to_string(b)), values[a], values[b]));
  out["comparisons"] = std::move(comparisons);

  Json sites = Json::array();
  for (std::size_t i = 0; i < s.sites.size() && i < top_sites; ++i)
    sites.push_back({{"site_id", s.sites[i].site_id},
                     {"leaning", to_string(s.sites[i].leaning)},
                     {"pixels", s.sites[i].pixels}});
  out["top_sites"] = std::move(sites);

  Json tps = Json::array();
  for (const auto& t : s.top_tps) {
    Json frac = Json::object();
    for (const auto& [l, f] : t.site_fraction) frac[std::string(to_string(l))] = f;
    tps.push_back({{"domain", t.domain}, {"pixels", t.pixels}, {"sites", t.sites}, {"site_fraction", frac}});
  }
  out["top_tps"] = std::move(tps);
  out["distinct_tps"] = s.distinct_tps;
  return out;
}

std::string table1_csv(const Json& csync) {
  std::string out =
      "group_pair,website_pairs,syncs,unique_ids,avg_syncs_per_unique_id,tp_tp_syncs,tp_tp_domain_pairs,"
      "avg_syncs_per_tp_tp_pair,fp_tp_syncs,fp_tp_domain_pairs,avg_syncs_per_fp_tp_pair\n";
  for (const auto& r : csync.at("table"))
    out += csv_row({r.at("group_pair").get<std::string>(), num(r.at("website_pairs")), num(r.at("syncs")),
                    num(r.at("unique_ids")), num(r.at("avg_syncs_per_unique_id")), num(r.at("tp_tp_syncs")),
                    num(r.at("tp_tp_domain_pairs")), num(r.at("avg_syncs_per_tp_tp_pair")),
                    num(r.at("fp_tp_syncs")), num(r.at("fp_tp_domain_pairs")),
                    num(r.at("avg_syncs_per_fp_tp_pair"))});
  return out;
}

std::string fig2_cdf_csv(const Json& census) {
  std::string out = "platform,leaning,cookies,cdf\n";
  for (const auto& [platform, groups] : census.at("cdf").items())
    for (const auto& [leaning, points] : groups.items())
      for (const auto& p : points) out += csv_row({platform, leaning, num(p[0]), num(p[1])});
  return out;
}

std::string fig3_categories_csv(const Json& census) {
  std::string out = "site_id,leaning,platform,category,tp_domains\n";
  for (const auto& s : census.at("per_site"))
    for (const auto& [cat, n] : s.at("categories").items())
      out += csv_row({s.at("site_id").get<std::string>(), s.at("leaning").get<std::string>(),
                      s.at("platform").get<std::string>(), cat, num(n)});
  return out;
}

std::string fig4_tp_coverage_csv(const Json& census) {
  std::string out = "presence,group,rank,tp_domain,sites,coverage,baseline\n";
  for (const auto& [presence, groups] : census.at("tp_coverage").items())
    for (const auto& [group, rows] : groups.items()) {
      std::size_t rank = 0;
      for (const auto& r : rows)
        out += csv_row({presence, group, std::to_string(++rank), r.at("tp_domain").get<std::string>(),
                        num(r.at("sites")), num(r.at("coverage")), num(r.at("baseline"))});
    }
  return out;
}

std::string mobile_desktop_csv(const Json& census) {
  std::string out = "site_id,leaning,desktop_median,mobile_median,desktop_tp_domains,mobile_tp_domains\n";
  for (const auto& r : census.at("mobile_desktop"))
    out += csv_row({r.at("site_id").get<std::string>(), r.at("leaning").get<std::string>(),
                    num(r.at("desktop_median")), num(r.at("mobile_median")), num(r.at("desktop_tp_domains")),
                    num(r.at("mobile_tp_domains"))});
  return out;
}

std::string fig5_cdf_csv(const Json& csync) {
  std::string out = "group_pair,syncs_per_unique_id,cdf\n";
  for (const auto& [pair, points] : csync.at("per_pair_cdf").items())
    for (const auto& p : points) out += csv_row({pair, num(p[0]), num(p[1])});
  return out;
}

std::string fig6_csync_top_tp_csv(const Json& csync) {
  std::string out = "rank,domain,total_syncs,tp_tp_syncs,fp_tp_syncs,left_sites,centre_sites,right_sites\n";
  std::size_t rank = 0;
  for (const auto& t : csync.at("summary").at("top_tps")) {
    const auto& f = t.at("site_fraction");
    auto frac = [&](const char* k) { return f.contains(k) ? num(f.at(k)) : std::string(); };
    out += csv_row({std::to_string(++rank), t.at("domain").get<std::string>(), num(t.at("total_syncs")),
                    num(t.at("tp_tp_syncs")), num(t.at("fp_tp_syncs")), frac("left"), frac("centre"),
                    frac("right")});
  }
  return out;
}

std::string fig7_cdf_csv(const Json& pixels) {
  std::string out = "leaning,pixels,cdf\n";
  for (const auto& [leaning, points] : pixels.at("cdf").items())
    for (const auto& p : points) out += csv_row({leaning, num(p[0]), num(p[1])});
  return out;
}

std::string fig8_top_sites_csv(const Json& pixels) {
  std::string out = "rank,site_id,leaning,pixels\n";
  std::size_t rank = 0;
  for (const auto& s : pixels.at("top_sites"))
    out += csv_row({std::to_string(++rank), s.at("site_id").get<std::string>(),
                    s.at("leaning").get<std::string>(), num(s.at("pixels"))});
  return out;
}

std::string fig9_top_pixel_tps_csv(const Json& pixels) {
  std::string out = "rank,domain,pixels,sites,left_sites,centre_sites,right_sites\n";
  std::size_t rank = 0;
  for (const auto& t : pixels.at("top_tps")) {
    const auto& f = t.at("site_fraction");
    auto frac = [&](const char* k) { return f.contains(k) ? num(f.at(k)) : std::string(); };
    out += csv_row({std::to_string(++rank), t.at("domain").get<std::string>(), num(t.at("pixels")),
                    num(t.at("sites")), frac("left"), frac("centre"), frac("right")});
  }
  return out;
}

ReportBundle build_report(const ReportSections& in) {
  const std::pair<const char*, const std::optional<Json>*> slots[] = {
      {"census", &in.census}, {"csync", &in.csync}, {"fingerprint", &in.fingerprint}, {"pixels", &in.pixels}};

  std::optional<std::pair<std::string, Json>> reference;
  for (const auto& [name, slot] : slots) {
    if (!*slot) continue;
    const Json& sec = **slot;
    if (!sec.is_object() || !sec.contains("sites") || !sec.contains("section"))
      throw Error(ErrorCode::kFormat, std::string("section ") + name + " is not a section document");
    if (sec.at("section") != name)
      throw Error(ErrorCode::kFormat, std::string("section ") + name + " holds a " +
                                          sec.at("section").dump() + " document");
    if (!reference) {
      reference.emplace(name, sec.at("sites"));
    } else if (sec.at("sites") != reference->second) {
      const auto a = reference->second.get<std::vector<std::string>>();
      const auto b = sec.at("sites").get<std::vector<std::string>>();
      std::vector<std::string> diff;
      std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
      std::string msg = std::string("sections ") + reference->first + " and " + name +
                        " cover different sites";
      if (!diff.empty()) msg += " (first difference: " + diff.front() + ")";
      throw Error(ErrorCode::kInconsistent, msg);
    }
  }
  if (!reference) throw Error(ErrorCode::kInvalidArgument, "report needs at least one section");

  ReportBundle bundle;
  Json sections = Json::object();
  for (const auto& [name, slot] : slots) {
    if (*slot) {
      Json sec = **slot;
      sec["status"] = "present";
      sections[name] = std::move(sec);
    } else {
      sections[name] = {{"status", "absent"}};
    }
  }
  bundle.report = {{"schema_version", kReportSchemaVersion},
                   {"generator", "tracklens"},
                   {"sites", reference->second},
                   {"metadata",
                    {{"ks_p_value", "asymptotic"},
                     {"median", "lower"},
                     {"website_pairs", "unordered"},
                     {"tp_presence",
                      {{"cookie_setting", "the TP set at least one cookie on the site"},
                       {"any_request", "the TP was contacted or set a cookie on the site"}}},
                     {"pixel_bodies", "inline"}}},
                   {"sections", std::move(sections)}};

  bundle.files.emplace_back("report.json", dump_json(bundle.report));
  if (in.census) {
    bundle.files.emplace_back("fig2_cdf.csv", fig2_cdf_csv(*in.census));
    bundle.files.emplace_back("fig3_categories.csv", fig3_categories_csv(*in.census));
    bundle.files.emplace_back("fig4_tp_coverage.csv", fig4_tp_coverage_csv(*in.census));
    bundle.files.emplace_back("mobile_desktop.csv", mobile_desktop_csv(*in.census));
  }
  if (in.csync) {
    bundle.files.emplace_back("table1.csv", table1_csv(*in.csync));
    bundle.files.emplace_back("fig5_cdf.csv", fig5_cdf_csv(*in.csync));
    bundle.files.emplace_back("fig6_csync_top_tp.csv", fig6_csync_top_tp_csv(*in.csync));
  }
  if (in.pixels) {
    bundle.files.emplace_back("fig7_cdf.csv", fig7_cdf_csv(*in.pixels));
    bundle.files.emplace_back("fig8_top_sites.csv", fig8_top_sites_csv(*in.pixels));
    bundle.files.emplace_back("fig9_top_pixel_tps.csv", fig9_top_pixel_tps_csv(*in.pixels));
  }
  return bundle;
}

}  // namespace tracklens
