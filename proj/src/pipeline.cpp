#include "pipeline.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <set>

#include "error.hpp"
#include "strings.hpp"

namespace tracklens {

namespace fs = std::filesystem;

namespace {

Json source_entry(const std::string& path, std::string_view contents) {
  return {{"path", path}, {"fnv1a", fnv1a_hex(contents)}};
}

std::string hash_config(const Json& config) { return fnv1a_hex(config.dump()); }

Json base_config(std::string_view command, std::span<const CrawlTrace> traces, const Resources& res,
                 std::initializer_list<const char*> used) {
  Json inputs = {{"traces", corpus_digest(traces)}};
  for (const char* kind : used)
    inputs[kind] = res.sources.contains(kind) ? res.sources.at(kind).at("fnv1a") : Json(nullptr);
  return {{"command", command}, {"tool_version", kVersion}, {"inputs", inputs}};
}

Json csync_options_json(const CsyncOptions& o) {
  return {{"min_id_len", o.min_id_len},
          {"max_id_len", o.max_id_len},
          {"min_cookie_days", o.min_cookie_days},
          {"min_crawls", o.min_crawls}};
}

Json fingerprint_options_json(const FingerprintOptions& o) {
  return {{"min_canvas_width", o.min_canvas_width},
          {"min_canvas_height", o.min_canvas_height},
          {"require_text_before_extract", o.require_text_before_extract},
          {"require_buffer_read", o.require_buffer_read}};
}

std::string leaning_name(const LabelSet& labels, const std::string& site_id) {
  const auto l = labels.leaning_of(site_id);
  return l ? std::string(to_string(*l)) : std::string();
}

std::string csv_line(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += csv_field(f);
    first = false;
  }
  return out + "\n";
}

struct Computed {
  RunOutput run;
  Json section;
};

Computed compute_census(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  const auto& labels = res.need_labels();
  const auto& suffixes = res.need_suffixes();
  Json config = base_config("census", traces, res, {"psl", "disconnect", "labels", "baseline"});
  config["options"] = {{"top_k", options.top_k}};
  Computed c{{"census", hash_config(config), config, {}}, {}};

  const CookieCensus cc = census(traces, labels, res.need_disconnect(), suffixes);
  std::optional<CookieShare> share;
  try {
    share = cookie_share(traces, suffixes);
  } catch (const Error&) {
  }
  c.section = census_section(cc, labels, share ? &*share : nullptr, res.baseline ? &*res.baseline : nullptr,
                             {c.run.config_hash, site_roster(traces)}, options.top_k);

  std::string csv = "site_id,leaning,platform,crawl_id,visit_id,cookie_count,fp_count,tp_count\n";
  for (const auto& v : cc.visits)
    csv += csv_line({v.site_id, std::string(to_string(v.leaning)), std::string(to_string(v.platform)), v.crawl_id,
                     v.visit_id, std::to_string(v.cookie_count), std::to_string(v.fp_count),
                     std::to_string(v.tp_count)});
  c.run.files.emplace_back("census.json", dump_json(c.section));
  c.run.files.emplace_back("census.csv", std::move(csv));
  return c;
}

Computed compute_csync(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  const auto& labels = res.need_labels();
  const auto& suffixes = res.need_suffixes();
  Json config = base_config("csync", traces, res, {"psl", "labels"});
  config["options"] = csync_options_json(options.csync);
  config["options"]["top_k"] = options.top_k;
  Computed c{{"csync", hash_config(config), config, {}}, {}};

  CsyncAnalysis a = analyze_csync(traces, labels, suffixes, options.csync, options.jobs);
  if (options.top_k != 10) a.summary = csync_summary(a.events, traces, labels, suffixes, options.top_k);
  c.section = csync_section(a, options.csync, {c.run.config_hash, site_roster(traces)});

  std::string jsonl;
  for (const auto& e : a.events) jsonl += to_json(e).dump() + "\n";
  c.run.files.emplace_back("syncs.jsonl", std::move(jsonl));
  c.run.files.emplace_back("table1.csv", table1_csv(c.section));
  c.run.files.emplace_back("csync.json", dump_json(c.section));
  return c;
}

Computed compute_fingerprint(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  const auto& labels = res.need_labels();
  Json config = base_config("fingerprint", traces, res, {"psl", "labels"});
  config["options"] = fingerprint_options_json(options.fingerprint);
  Computed c{{"fingerprint", hash_config(config), config, {}}, {}};

  const auto findings = detect_fingerprints(traces, res.need_suffixes(), options.fingerprint);
  const auto summary = fingerprint_summary(findings, labels);
  c.section = fingerprint_section(findings, summary, options.fingerprint, {c.run.config_hash, site_roster(traces)});

  std::set<std::tuple<std::string, std::string, FingerprintKind>> seen;
  std::string csv = "site_id,leaning,script_url,script_domain,kind\n";
  std::string jsonl;
  for (const auto& f : findings) {
    jsonl += Json{{"visit_id", f.visit_id},
                  {"site_id", f.site_id},
                  {"script_url", f.script_url},
                  {"script_domain", f.script_domain},
                  {"kind", to_string(f.kind)},
                  {"evidence", f.evidence}}
                 .dump() +
             "\n";
    if (!seen.emplace(f.site_id, f.script_url, f.kind).second) continue;
    csv += csv_line({f.site_id, leaning_name(labels, f.site_id), f.script_url, f.script_domain,
                     std::string(to_string(f.kind))});
  }
  c.run.files.emplace_back("fingerprints.csv", std::move(csv));
  c.run.files.emplace_back("fingerprints.jsonl", std::move(jsonl));
  c.run.files.emplace_back("fingerprint_summary.json", dump_json(c.section));
  return c;
}

Computed compute_pixels(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  const auto& labels = res.need_labels();
  Json config = base_config("pixels", traces, res, {"psl", "labels"});
  config["options"] = {{"size_cap", options.pixels.size_cap}, {"top_k", options.top_k}};
  Computed c{{"pixels", hash_config(config), config, {}}, {}};

  const PixelScan scan = scan_pixels(traces, res.need_suffixes(), options.pixels, options.jobs);
  const PixelSummary summary = pixel_summary(scan, labels, options.top_k);
  c.section = pixel_section(summary, options.pixels, {c.run.config_hash, site_roster(traces)});

  std::string csv = "site_id,leaning,visit_id,image_url,setter_domain,party,format,content_length\n";
  for (const auto& f : scan.findings)
    csv += csv_line({f.site_id, leaning_name(labels, f.site_id), f.visit_id, f.image_url, f.setter_domain,
                     std::string(to_string(f.party)), std::string(to_string(f.format)),
                     std::to_string(f.content_length)});
  c.run.files.emplace_back("pixels.csv", std::move(csv));
  c.run.files.emplace_back("pixel_summary.json", dump_json(c.section));
  return c;
}

std::optional<std::string> resolve(const Json& j, const char* key, const std::string& base_dir) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) throw Error(ErrorCode::kFormat, std::string("config: ") + key + " must be a path");
  fs::path p(j.at(key).get<std::string>());
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  return p.lexically_normal().string();
}

}  // namespace

void Resources::load_psl(const std::string& path) {
  const std::string text = read_file(path);
  suffixes = SuffixSet::parse(text);
  sources["psl"] = source_entry(path, text);
}

void Resources::load_disconnect(const std::string& path) {
  const std::string text = read_file(path);
  disconnect = DisconnectMap::parse(text);
  sources["disconnect"] = source_entry(path, text);
}

void Resources::load_labels(const std::string& path) {
  const std::string text = read_file(path);
  labels = LabelSet(parse_labels_csv(text));
  sources["labels"] = source_entry(path, text);
}

void Resources::load_baseline(const std::string& path) {
  const std::string text = read_file(path);
  baseline = BaselineTable::parse(text);
  sources["baseline"] = source_entry(path, text);
}

const SuffixSet& Resources::need_suffixes() const {
  if (!suffixes) throw Error(ErrorCode::kInvalidArgument, "no public suffix list loaded");
  return *suffixes;
}

const DisconnectMap& Resources::need_disconnect() const {
  if (!disconnect) throw Error(ErrorCode::kInvalidArgument, "no Disconnect list loaded");
  return *disconnect;
}

const LabelSet& Resources::need_labels() const {
  if (!labels) throw Error(ErrorCode::kInvalidArgument, "no site labels loaded");
  return *labels;
}

ConfigFile parse_config(std::string_view json_text, const std::string& base_dir) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kFormat, "config must be a JSON object");
  ConfigFile c;
  c.psl = resolve(j, "psl", base_dir);
  c.disconnect = resolve(j, "disconnect", base_dir);
  c.labels = resolve(j, "labels", base_dir);
  c.baseline = resolve(j, "baseline", base_dir);
  for (const auto& [k, v] : j.items())
    if (k != "psl" && k != "disconnect" && k != "labels" && k != "baseline") c.options[k] = v;
  RunOptions probe;
  apply_options(probe, c.options);  // reject bad keys early
  return c;
}

ConfigFile load_config(const std::string& path) {
  return parse_config(read_file(path), fs::path(path).parent_path().string());
}

void load_resources(Resources& res, const ConfigFile& config) {
  if (config.psl) res.load_psl(*config.psl);
  if (config.disconnect) res.load_disconnect(*config.disconnect);
  if (config.labels) res.load_labels(*config.labels);
  if (config.baseline) res.load_baseline(*config.baseline);
}

void set_option(RunOptions& o, std::string_view key, std::int64_t v) {
  auto bad = [&](std::string_view why) {
    return Error(ErrorCode::kInvalidArgument,
                 "invalid value " + std::to_string(v) + " for " + std::string(key) + ": " + std::string(why));
  };
  auto at_least = [&](std::int64_t lo) {
    if (v < lo) throw bad("must be at least " + std::to_string(lo));
  };
  if (key == "min_id_len") {
    at_least(1);
    o.csync.min_id_len = static_cast<std::size_t>(v);
  } else if (key == "max_id_len") {
    at_least(1);
    o.csync.max_id_len = static_cast<std::size_t>(v);
  } else if (key == "min_cookie_days") {
    at_least(0);
    o.csync.min_cookie_days = v;
  } else if (key == "min_crawls") {
    at_least(1);
    o.csync.min_crawls = static_cast<std::size_t>(v);
  } else if (key == "size_cap") {
    at_least(1);
    o.pixels.size_cap = static_cast<std::size_t>(v);
  } else if (key == "min_canvas_width") {
    at_least(1);
    o.fingerprint.min_canvas_width = static_cast<int>(v);
  } else if (key == "min_canvas_height") {
    at_least(1);
    o.fingerprint.min_canvas_height = static_cast<int>(v);
  } else if (key == "require_text_before_extract") {
    if (v != 0 && v != 1) throw bad("must be 0 or 1");
    o.fingerprint.require_text_before_extract = v != 0;
  } else if (key == "require_buffer_read") {
    if (v != 0 && v != 1) throw bad("must be 0 or 1");
    o.fingerprint.require_buffer_read = v != 0;
  } else if (key == "top_k") {
    at_least(1);
    o.top_k = static_cast<std::size_t>(v);
  } else if (key == "jobs") {
    at_least(1);
    o.jobs = static_cast<unsigned>(std::min<std::int64_t>(v, 256));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown option " + std::string(key));
  }
  if (o.csync.min_id_len > o.csync.max_id_len)
    throw Error(ErrorCode::kInvalidArgument, "min_id_len exceeds max_id_len");
}

void apply_options(RunOptions& options, const Json& values) {
  for (const auto& [k, v] : values.items()) {
    if (v.is_boolean())
      set_option(options, k, v.get<bool>() ? 1 : 0);
    else if (v.is_number_integer())
      set_option(options, k, v.get<std::int64_t>());
    else
      throw Error(ErrorCode::kInvalidArgument, "option " + k + " must be an integer");
  }
}

std::string corpus_digest(std::span<const CrawlTrace> traces) { return fnv1a_hex(serialize_traces(traces)); }

RunOutput run_census(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  return compute_census(traces, res, options).run;
}

RunOutput run_csync(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  return compute_csync(traces, res, options).run;
}

RunOutput run_fingerprint(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  return compute_fingerprint(traces, res, options).run;
}

RunOutput run_pixels(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  return compute_pixels(traces, res, options).run;
}

RunOutput run_report(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options) {
  ReportSections sections;
  if (res.disconnect) sections.census = compute_census(traces, res, options).section;
  sections.csync = compute_csync(traces, res, options).section;
  sections.fingerprint = compute_fingerprint(traces, res, options).section;
  // A corpus without any image response has no pixel section.
  bool any_image = false;
  for (const auto& t : traces)
    for (const auto& e : t.events) any_image = any_image || is_image_response(e);
  if (any_image) sections.pixels = compute_pixels(traces, res, options).section;
  return run_report(sections);
}

RunOutput run_report(const ReportSections& sections) {
  ReportBundle bundle = build_report(sections);
  Json hashes = Json::object();
  for (const auto& [name, sec] : bundle.report.at("sections").items())
    hashes[name] = sec.contains("config_hash") ? sec.at("config_hash") : Json(nullptr);
  Json config = {{"command", "report"}, {"tool_version", kVersion}, {"sections", hashes}};
  return {"report", hash_config(config), config, std::move(bundle.files)};
}

ReportSections read_sections(const std::vector<std::string>& dirs) {
  ReportSections out;
  const std::pair<const char*, std::optional<Json>*> files[] = {{"census.json", &out.census},
                                                                {"csync.json", &out.csync},
                                                                {"fingerprint_summary.json", &out.fingerprint},
                                                                {"pixel_summary.json", &out.pixels}};
  for (const auto& dir : dirs) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::kNotFound, "not a directory: " + dir);
    for (const auto& [name, slot] : files) {
      const fs::path p = fs::path(dir) / name;
      if (!fs::exists(p)) continue;
      if (*slot) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " found in more than one input");
      try {
        *slot = Json::parse(read_file(p.string()));
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::kParse, p.string() + ": " + e.what());
      }
    }
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run(const RunOutput& run, const std::string& dir, std::optional<std::string> created_at) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  Json outputs = Json::array();
  for (const auto& [name, contents] : run.files) {
    write_file((fs::path(dir) / name).string(), contents);
    outputs.push_back({{"file", name}, {"bytes", contents.size()}, {"fnv1a", fnv1a_hex(contents)}});
  }
  Json manifest = {{"command", run.command},
                   {"tool_version", kVersion},
                   {"config_hash", run.config_hash},
                   {"config", run.config},
                   {"outputs", outputs}};
  if (created_at) manifest["created_at"] = *created_at;
  write_file((fs::path(dir) / "manifest.json").string(), dump_json(manifest));
}

}  // namespace tracklens
