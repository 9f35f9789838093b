// Command-line front end. Talks to the analysis core only through the C API.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracklens/tracklens.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  tl_status status;
  std::string message;
};

std::string json_escape(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

int report_error(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << "{\"error\":{\"code\":\"" << json_escape(code) << "\",\"message\":\"" << json_escape(message)
            << "\"}}\n";
  return exit_code;
}

void check(tl_status s) {
  if (s != TL_OK) throw Failure{s, tl_last_error()};
}

// Missing inputs and bad option values are usage errors.
int exit_code_for(tl_status s) {
  return (s == TL_ERR_NOT_FOUND || s == TL_ERR_INVALID_ARGUMENT) ? kExitUsage : kExitFailure;
}

struct Context {
  tl_context* ctx = nullptr;
  Context() { check(tl_context_create(&ctx)); }
  ~Context() { tl_context_destroy(ctx); }
  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;
};

struct Corpus {
  tl_corpus* corpus = nullptr;
  Corpus() { check(tl_corpus_create(&corpus)); }
  ~Corpus() { tl_corpus_destroy(corpus); }
  Corpus(const Corpus&) = delete;
  Corpus& operator=(const Corpus&) = delete;
};

struct Common {
  std::string config;
  std::string psl, disconnect, labels, baseline;
  std::string out_dir;
  std::vector<std::string> traces;
  std::optional<std::int64_t> jobs, top_k;
};

struct Thresholds {
  std::optional<std::int64_t> min_id_len, max_id_len, min_cookie_days, min_crawls, size_cap;
  std::optional<std::int64_t> min_canvas_width, min_canvas_height, require_text, require_read;
};

void add_resources(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config naming the reference data files")
      ->envname("TRACKLENS_CONFIG");
  cmd->add_option("--psl", c.psl, "Public suffix list (overrides the config)");
  cmd->add_option("--disconnect", c.disconnect, "Disconnect services.json (overrides the config)");
  cmd->add_option("--labels", c.labels, "Site labels CSV (overrides the config)");
  cmd->add_option("--baseline", c.baseline, "Baseline TP prevalence CSV (overrides the config)");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::Range(1, 256));
}

void add_csync_flags(CLI::App* cmd, Thresholds& t) {
  cmd->add_option("--min-id-len", t.min_id_len, "Shortest token that can be a user ID (default 11)")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--max-id-len", t.max_id_len, "Longest token that can be a user ID (default 128)")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--min-cookie-days", t.min_cookie_days, "Cookie lifetime must exceed this (default 30)")
      ->check(CLI::Range(0, 100000));
  cmd->add_option("--min-crawls", t.min_crawls, "Stateful crawls an ID must recur in (default 2)")
      ->check(CLI::Range(1, 100000));
}

void add_pixel_flags(CLI::App* cmd, Thresholds& t) {
  cmd->add_option("--size-cap", t.size_cap, "Image responses must be smaller than this many bytes (default 1024)")
      ->check(CLI::Range(1, 1 << 30));
}

void add_fingerprint_flags(CLI::App* cmd, Thresholds& t) {
  cmd->add_option("--min-canvas-width", t.min_canvas_width, "Smallest extracted canvas width (default 16)")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--min-canvas-height", t.min_canvas_height, "Smallest extracted canvas height (default 16)")
      ->check(CLI::Range(1, 100000));
  cmd->add_option("--require-text", t.require_text, "Canvas text before extraction, 0 or 1 (default 1)")
      ->check(CLI::Range(0, 1));
  cmd->add_option("--require-buffer-read", t.require_read, "Audio sample read required, 0 or 1 (default 1)")
      ->check(CLI::Range(0, 1));
}

void load_context(tl_context* ctx, const Common& c) {
  if (!c.config.empty()) check(tl_context_load_config(ctx, c.config.c_str()));
  if (!c.psl.empty()) check(tl_context_load_psl(ctx, c.psl.c_str()));
  if (!c.disconnect.empty()) check(tl_context_load_disconnect(ctx, c.disconnect.c_str()));
  if (!c.labels.empty()) check(tl_context_load_labels(ctx, c.labels.c_str()));
  if (!c.baseline.empty()) check(tl_context_load_baseline(ctx, c.baseline.c_str()));
  if (c.jobs) check(tl_context_set_option(ctx, "jobs", *c.jobs));
  if (c.top_k) check(tl_context_set_option(ctx, "top_k", *c.top_k));
}

void apply_thresholds(tl_context* ctx, const Thresholds& t) {
  const std::pair<const char*, const std::optional<std::int64_t>*> all[] = {
      {"max_id_len", &t.max_id_len},
      {"min_id_len", &t.min_id_len},
      {"min_cookie_days", &t.min_cookie_days},
      {"min_crawls", &t.min_crawls},
      {"size_cap", &t.size_cap},
      {"min_canvas_width", &t.min_canvas_width},
      {"min_canvas_height", &t.min_canvas_height},
      {"require_text_before_extract", &t.require_text},
      {"require_buffer_read", &t.require_read}};
  for (const auto& [key, value] : all)
    if (*value) check(tl_context_set_option(ctx, key, **value));
}

void read_corpus(tl_corpus* corpus, const std::vector<std::string>& paths) {
  for (const auto& p : paths) check(tl_corpus_read_jsonl(corpus, p.c_str()));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{TL_ERR_NOT_FOUND, "cannot open " + path};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tracklens: web tracking measurement over crawl traces"};
  app.set_version_flag("--version", std::string(tl_version()));
  app.require_subcommand(1);

  Common common;
  Thresholds thresholds;

  auto* ingest = app.add_subcommand("ingest", "Convert a HAR or cookies.txt capture into a trace");
  add_resources(ingest, common);
  std::string har, cookies_txt, site, platform = "desktop", crawl_id = "crawl-0", visit_id;
  int visit_order = 0;
  std::int64_t capture_time = 0;
  bool stateful = false;
  std::string ingest_out;
  auto* har_opt = ingest->add_option("--har", har, "HAR 1.2 file");
  auto* txt_opt = ingest->add_option("--cookies-txt", cookies_txt, "Netscape cookies.txt file");
  har_opt->excludes(txt_opt);
  ingest->add_option("--site", site, "Labeled site id of the visit")->required();
  ingest->add_option("--platform", platform, "desktop or mobile")
      ->check(CLI::IsMember({"desktop", "mobile"}));
  ingest->add_option("--crawl-id", crawl_id, "Crawl the visit belongs to");
  ingest->add_option("--visit-id", visit_id, "Visit id (default: crawl/site)");
  ingest->add_option("--visit-order", visit_order, "Position of the visit within the crawl")
      ->check(CLI::NonNegativeNumber);
  ingest->add_option("--capture-time", capture_time, "Capture time in epoch ms, stands in for cookie set times");
  ingest->add_flag("--stateful", stateful, "The visit belongs to a stateful crawl");
  ingest->add_option("--traces", common.traces, "Existing JSONL corpus to append to");
  ingest->add_option("--out", ingest_out, "Output JSONL file")->required();

  auto analysis = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    add_resources(cmd, common);
    cmd->add_option("--traces", common.traces, "JSONL trace corpus (repeatable)")->required();
    cmd->add_option("--out-dir", common.out_dir, "Run directory")->required();
    cmd->add_option("--top-k", common.top_k, "Rows in ranked tables (default 10)")->check(CLI::Range(1, 100000));
    return cmd;
  };
  auto* census = analysis("census", "Cookie census per site, leaning and platform");
  auto* csync = analysis("csync", "Cookie synchronization and the group-pair table");
  add_csync_flags(csync, thresholds);
  auto* fingerprint = analysis("fingerprint", "Canvas, WebRTC and AudioContext fingerprinting");
  add_fingerprint_flags(fingerprint, thresholds);
  auto* pixels = analysis("pixels", "Invisible 1x1 tracking pixels");
  add_pixel_flags(pixels, thresholds);

  auto* report = app.add_subcommand("report", "Assemble report.json and figure CSVs");
  add_resources(report, common);
  std::vector<std::string> from_dirs;
  auto* report_traces = report->add_option("--traces", common.traces, "Compute every section from this corpus");
  auto* report_from = report->add_option("--from", from_dirs, "Run directory holding section files (repeatable)");
  report_traces->excludes(report_from);
  report->add_option("--out-dir", common.out_dir, "Run directory")->required();
  report->add_option("--top-k", common.top_k, "Rows in ranked tables (default 10)")->check(CLI::Range(1, 100000));
  add_csync_flags(report, thresholds);
  add_fingerprint_flags(report, thresholds);
  add_pixel_flags(report, thresholds);

  auto* synth = app.add_subcommand("synth", "Generate a planted corpus with ground truth");
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  synth->add_option("--spec", spec_path, "Plant spec JSON (default: built-in spec)");
  synth->add_option("--seed", seed, "Override the spec's RNG seed");
  synth->add_option("--out-dir", common.out_dir, "Output directory")->required();

  auto* validate = app.add_subcommand("validate", "Check traces against the schema");
  validate->add_option("--traces", common.traces, "JSONL trace corpus (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid_argument", e.what(), kExitUsage);
  }

  try {
    if (*synth) {
      std::optional<std::string> spec;
      if (!spec_path.empty()) spec = slurp(spec_path);
      Corpus corpus;
      check(tl_synth_generate(spec ? spec->c_str() : nullptr, seed.has_value(), seed.value_or(0),
                              common.out_dir.c_str(), corpus.corpus));
      std::cout << "wrote " << tl_corpus_size(corpus.corpus) << " traces to " << common.out_dir << "\n";
      return 0;
    }

    if (*validate) {
      Corpus corpus;
      read_corpus(corpus.corpus, common.traces);
      size_t violations = 0, flags = 0;
      char* details = nullptr;
      check(tl_corpus_validate(corpus.corpus, &violations, &flags, &details));
      std::cout << details;
      tl_string_free(details);
      std::cout << tl_corpus_size(corpus.corpus) << " traces, " << violations << " violations, " << flags
                << " flagged records\n";
      return violations == 0 ? 0 : kExitFailure;
    }

    Context ctx;
    load_context(ctx.ctx, common);
    apply_thresholds(ctx.ctx, thresholds);

    if (*ingest) {
      if (har.empty() && cookies_txt.empty())
        return report_error("invalid_argument", "ingest needs --har or --cookies-txt", kExitUsage);
      Corpus corpus;
      read_corpus(corpus.corpus, common.traces);
      tl_visit_info visit{};
      visit.site_id = site.c_str();
      visit.platform = platform.c_str();
      visit.visit_id = visit_id.empty() ? nullptr : visit_id.c_str();
      visit.crawl_id = crawl_id.c_str();
      visit.stateful = stateful ? 1 : 0;
      visit.visit_order = visit_order;
      visit.capture_time_ms = capture_time;
      size_t warnings = 0;
      if (!har.empty())
        check(tl_corpus_ingest_har(ctx.ctx, corpus.corpus, har.c_str(), &visit, &warnings));
      else
        check(tl_corpus_ingest_cookies_txt(ctx.ctx, corpus.corpus, cookies_txt.c_str(), &visit, &warnings));
      check(tl_corpus_write_jsonl(corpus.corpus, ingest_out.c_str()));
      std::cout << "wrote " << tl_corpus_size(corpus.corpus) << " traces to " << ingest_out << " (" << warnings
                << " warnings)\n";
      return 0;
    }

    if (*report && !from_dirs.empty()) {
      std::vector<const char*> dirs;
      for (const auto& d : from_dirs) dirs.push_back(d.c_str());
      check(tl_run_report_from_dirs(ctx.ctx, dirs.data(), dirs.size(), common.out_dir.c_str()));
      std::cout << "report written to " << common.out_dir << "\n";
      return 0;
    }
    if (*report && common.traces.empty())
      return report_error("invalid_argument", "report needs --traces or --from", kExitUsage);

    Corpus corpus;
    read_corpus(corpus.corpus, common.traces);
    const char* out = common.out_dir.c_str();
    if (*census) check(tl_run_census(ctx.ctx, corpus.corpus, out));
    else if (*csync) check(tl_run_csync(ctx.ctx, corpus.corpus, out));
    else if (*fingerprint) check(tl_run_fingerprint(ctx.ctx, corpus.corpus, out));
    else if (*pixels) check(tl_run_pixels(ctx.ctx, corpus.corpus, out));
    else if (*report) check(tl_run_report(ctx.ctx, corpus.corpus, out));
    std::cout << app.get_subcommands().front()->get_name() << " over " << tl_corpus_size(corpus.corpus)
              << " traces written to " << common.out_dir << "\n";
    return 0;
  } catch (const Failure& f) {
    return report_error(tl_status_name(f.status), f.message, exit_code_for(f.status));
  }
}
