#include "tracklens/tracklens.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>
#include <vector>

#include "error.hpp"
#include "pipeline.hpp"
#include "stats.hpp"
#include "strings.hpp"
#include "synth.hpp"

struct tl_context {
  tracklens::Resources resources;
  tracklens::RunOptions options;
};

struct tl_corpus {
  std::vector<tracklens::CrawlTrace> traces;
};

namespace {

thread_local std::string g_last_error;

tl_status code_of(tracklens::ErrorCode c) {
  using tracklens::ErrorCode;
  switch (c) {
    case ErrorCode::kInvalidArgument: return TL_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return TL_ERR_IO;
    case ErrorCode::kParse: return TL_ERR_PARSE;
    case ErrorCode::kFormat: return TL_ERR_FORMAT;
    case ErrorCode::kNotFound: return TL_ERR_NOT_FOUND;
    case ErrorCode::kInconsistent: return TL_ERR_INCONSISTENT;
    case ErrorCode::kInternal: return TL_ERR_INTERNAL;
  }
  return TL_ERR_INTERNAL;
}

template <typename Fn>
tl_status guard(Fn&& fn) {
  try {
    fn();
    return TL_OK;
  } catch (const tracklens::Error& e) {
    g_last_error = e.what();
    return code_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return TL_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TL_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw tracklens::Error(tracklens::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

tracklens::VisitContext visit_context(const tl_visit_info& v, const tracklens::SiteLabel& site) {
  tracklens::VisitContext ctx;
  if (v.crawl_id) ctx.crawl_id = v.crawl_id;
  ctx.visit_id = v.visit_id ? std::string(v.visit_id)
                            : ctx.crawl_id + "/" + site.site_id +
                                  (site.platform == tracklens::Platform::kMobile ? "/mobile" : "");
  ctx.crawl_mode = v.stateful ? tracklens::CrawlMode::kStateful : tracklens::CrawlMode::kStateless;
  ctx.visit_order = v.visit_order;
  ctx.capture_time_ms = v.capture_time_ms;
  return ctx;
}

const tracklens::SiteLabel& visit_site(const tl_context& ctx, const tl_visit_info& v) {
  require(v.site_id, "site_id");
  tracklens::Platform platform = tracklens::Platform::kDesktop;
  if (v.platform) {
    const auto p = tracklens::parse_platform(v.platform);
    if (!p) throw tracklens::Error(tracklens::ErrorCode::kInvalidArgument, std::string("unknown platform ") + v.platform);
    platform = *p;
  }
  const auto* label = ctx.resources.need_labels().find(v.site_id, platform);
  if (!label)
    throw tracklens::Error(tracklens::ErrorCode::kNotFound, std::string("site ") + v.site_id + " (" +
                                                                std::string(tracklens::to_string(platform)) +
                                                                ") is not in the labels");
  return *label;
}

template <typename Ingest>
tl_status ingest(tl_context* ctx, tl_corpus* corpus, const char* path, const tl_visit_info* visit,
                 size_t* warnings, Ingest&& fn) {
  return guard([&] {
    require(ctx, "context");
    require(corpus, "corpus");
    require(path, "path");
    require(visit, "visit");
    const auto& site = visit_site(*ctx, *visit);
    auto result = fn(tracklens::read_file(path), site, ctx->resources.need_suffixes(), visit_context(*visit, site));
    corpus->traces.push_back(std::move(result.trace));
    if (warnings) *warnings = result.warnings.size();
  });
}

template <typename Run>
tl_status run(tl_context* ctx, const tl_corpus* corpus, const char* out_dir, Run&& fn) {
  return guard([&] {
    require(ctx, "context");
    require(corpus, "corpus");
    require(out_dir, "out_dir");
    tracklens::write_run(fn(corpus->traces, ctx->resources, ctx->options), out_dir, tracklens::utc_timestamp());
  });
}

}  // namespace

extern "C" {

const char* tl_version(void) { return tracklens::kVersion; }

const char* tl_status_name(tl_status status) {
  switch (status) {
    case TL_OK: return "ok";
    case TL_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case TL_ERR_IO: return "io";
    case TL_ERR_PARSE: return "parse";
    case TL_ERR_FORMAT: return "format";
    case TL_ERR_NOT_FOUND: return "not_found";
    case TL_ERR_INCONSISTENT: return "inconsistent";
    case TL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* tl_last_error(void) { return g_last_error.c_str(); }

void tl_string_free(char* s) { std::free(s); }

tl_status tl_context_create(tl_context** out) {
  return guard([&] {
    require(out, "out");
    *out = new tl_context();
  });
}

void tl_context_destroy(tl_context* ctx) { delete ctx; }

tl_status tl_context_load_config(tl_context* ctx, const char* path) {
  return guard([&] {
    require(ctx, "context");
    require(path, "path");
    const auto config = tracklens::load_config(path);
    tracklens::RunOptions options = ctx->options;
    tracklens::apply_options(options, config.options);
    tracklens::load_resources(ctx->resources, config);
    ctx->options = options;
  });
}

#define TL_LOADER(fn, method)                          \
  tl_status fn(tl_context* ctx, const char* path) {    \
    return guard([&] {                                 \
      require(ctx, "context");                         \
      require(path, "path");                           \
      ctx->resources.method(path);                     \
    });                                                \
  }

TL_LOADER(tl_context_load_psl, load_psl)
TL_LOADER(tl_context_load_disconnect, load_disconnect)
TL_LOADER(tl_context_load_labels, load_labels)
TL_LOADER(tl_context_load_baseline, load_baseline)
#undef TL_LOADER

tl_status tl_context_set_option(tl_context* ctx, const char* key, int64_t value) {
  return guard([&] {
    require(ctx, "context");
    require(key, "key");
    tracklens::RunOptions options = ctx->options;
    tracklens::set_option(options, key, value);
    ctx->options = options;
  });
}

tl_status tl_context_get_option(const tl_context* ctx, const char* key, int64_t* out) {
  return guard([&] {
    require(ctx, "context");
    require(key, "key");
    require(out, "out");
    const auto& o = ctx->options;
    const std::string k = key;
    if (k == "min_id_len") *out = static_cast<int64_t>(o.csync.min_id_len);
    else if (k == "max_id_len") *out = static_cast<int64_t>(o.csync.max_id_len);
    else if (k == "min_cookie_days") *out = o.csync.min_cookie_days;
    else if (k == "min_crawls") *out = static_cast<int64_t>(o.csync.min_crawls);
    else if (k == "size_cap") *out = static_cast<int64_t>(o.pixels.size_cap);
    else if (k == "min_canvas_width") *out = o.fingerprint.min_canvas_width;
    else if (k == "min_canvas_height") *out = o.fingerprint.min_canvas_height;
    else if (k == "require_text_before_extract") *out = o.fingerprint.require_text_before_extract;
    else if (k == "require_buffer_read") *out = o.fingerprint.require_buffer_read;
    else if (k == "top_k") *out = static_cast<int64_t>(o.top_k);
    else if (k == "jobs") *out = o.jobs;
    else throw tracklens::Error(tracklens::ErrorCode::kInvalidArgument, "unknown option " + k);
  });
}

tl_status tl_corpus_create(tl_corpus** out) {
  return guard([&] {
    require(out, "out");
    *out = new tl_corpus();
  });
}

void tl_corpus_destroy(tl_corpus* corpus) { delete corpus; }

size_t tl_corpus_size(const tl_corpus* corpus) { return corpus ? corpus->traces.size() : 0; }

tl_status tl_corpus_read_jsonl(tl_corpus* corpus, const char* path) {
  return guard([&] {
    require(corpus, "corpus");
    require(path, "path");
    auto traces = tracklens::read_traces(path);
    corpus->traces.insert(corpus->traces.end(), std::make_move_iterator(traces.begin()),
                          std::make_move_iterator(traces.end()));
  });
}

tl_status tl_corpus_write_jsonl(const tl_corpus* corpus, const char* path) {
  return guard([&] {
    require(corpus, "corpus");
    require(path, "path");
    tracklens::write_traces(corpus->traces, path);
  });
}

tl_status tl_corpus_ingest_har(tl_context* ctx, tl_corpus* corpus, const char* path, const tl_visit_info* visit,
                               size_t* warnings) {
  return ingest(ctx, corpus, path, visit, warnings, [](const std::string& text, auto&&... rest) {
    return tracklens::ingest_har(text, rest...);
  });
}

tl_status tl_corpus_ingest_cookies_txt(tl_context* ctx, tl_corpus* corpus, const char* path,
                                       const tl_visit_info* visit, size_t* warnings) {
  return ingest(ctx, corpus, path, visit, warnings, [](const std::string& text, auto&&... rest) {
    return tracklens::ingest_cookies_txt(text, rest...);
  });
}

tl_status tl_corpus_validate(const tl_corpus* corpus, size_t* violations, size_t* flags, char** report_jsonl) {
  return guard([&] {
    require(corpus, "corpus");
    std::string out;
    size_t n = 0, f = 0;
    for (const auto& t : corpus->traces) {
      for (const auto& v : tracklens::validate_trace(t)) {
        const bool flag = v.rule == "malformed-cookie";
        ++(flag ? f : n);
        out += nlohmann::json{{"visit_id", t.visit_id},
                              {"record", v.record},
                              {"rule", v.rule},
                              {"severity", flag ? "flag" : "violation"},
                              {"detail", v.detail}}
                   .dump() +
               "\n";
      }
    }
    if (violations) *violations = n;
    if (flags) *flags = f;
    if (report_jsonl) *report_jsonl = dup_string(out);
  });
}

tl_status tl_run_census(tl_context* ctx, const tl_corpus* corpus, const char* out_dir) {
  return run(ctx, corpus, out_dir, [](auto&&... a) { return tracklens::run_census(a...); });
}

tl_status tl_run_csync(tl_context* ctx, const tl_corpus* corpus, const char* out_dir) {
  return run(ctx, corpus, out_dir, [](auto&&... a) { return tracklens::run_csync(a...); });
}

tl_status tl_run_fingerprint(tl_context* ctx, const tl_corpus* corpus, const char* out_dir) {
  return run(ctx, corpus, out_dir, [](auto&&... a) { return tracklens::run_fingerprint(a...); });
}

tl_status tl_run_pixels(tl_context* ctx, const tl_corpus* corpus, const char* out_dir) {
  return run(ctx, corpus, out_dir, [](auto&&... a) { return tracklens::run_pixels(a...); });
}

tl_status tl_run_report(tl_context* ctx, const tl_corpus* corpus, const char* out_dir) {
  return run(ctx, corpus, out_dir, [](auto&&... a) { return tracklens::run_report(a...); });
}

tl_status tl_run_report_from_dirs(tl_context* ctx, const char* const* dirs, size_t n_dirs, const char* out_dir) {
  return guard([&] {
    require(ctx, "context");
    require(dirs || n_dirs == 0, "dirs");
    require(out_dir, "out_dir");
    std::vector<std::string> paths;
    for (size_t i = 0; i < n_dirs; ++i) {
      require(dirs[i], "dirs[i]");
      paths.emplace_back(dirs[i]);
    }
    tracklens::write_run(tracklens::run_report(tracklens::read_sections(paths)), out_dir,
                         tracklens::utc_timestamp());
  });
}

tl_status tl_synth_generate(const char* spec_json, int has_seed, uint64_t seed, const char* out_dir,
                            tl_corpus* corpus) {
  return guard([&] {
    require(out_dir, "out_dir");
    tracklens::PlantSpec spec;
    if (spec_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(spec_json);
      } catch (const nlohmann::json::exception& e) {
        throw tracklens::Error(tracklens::ErrorCode::kParse, std::string("plant spec: ") + e.what());
      }
      spec = tracklens::plant_spec_from_json(j);
      if (has_seed) spec.rng_seed = seed;
    } else {
      spec = tracklens::default_spec(has_seed ? seed : 7);
    }
    auto out = tracklens::generate(spec);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw tracklens::Error(tracklens::ErrorCode::kIo, std::string("cannot create ") + out_dir);
    const std::filesystem::path dir(out_dir);
    tracklens::write_traces(out.traces, (dir / "traces.jsonl").string());
    tracklens::write_file((dir / "truth.json").string(), tracklens::dump_json(tracklens::to_json(out.truth)));
    tracklens::write_file((dir / "spec.json").string(), tracklens::dump_json(tracklens::to_json(spec)));
    tracklens::write_file((dir / "labels.csv").string(), tracklens::labels_csv(spec.sites));
    if (corpus) {
      corpus->traces.insert(corpus->traces.end(), std::make_move_iterator(out.traces.begin()),
                            std::make_move_iterator(out.traces.end()));
    }
  });
}

tl_status tl_registrable_domain(const tl_context* ctx, const char* url_or_host, char** out) {
  return guard([&] {
    require(ctx, "context");
    require(url_or_host, "url_or_host");
    require(out, "out");
    *out = dup_string(ctx->resources.need_suffixes().registrable_domain(url_or_host));
  });
}

tl_status tl_ks_test(const double* a, size_t n_a, const double* b, size_t n_b, double* statistic,
                     double* p_value) {
  return guard([&] {
    require(a || n_a == 0, "a");
    require(b || n_b == 0, "b");
    const auto r = tracklens::stats::ks_test({a, n_a}, {b, n_b});
    if (statistic) *statistic = r.statistic;
    if (p_value) *p_value = r.p_value;
  });
}

tl_status tl_cohens_kappa(const char* const* labels_a, const char* const* labels_b, size_t n, double* kappa) {
  return guard([&] {
    require(labels_a || n == 0, "labels_a");
    require(labels_b || n == 0, "labels_b");
    require(kappa, "kappa");
    std::vector<std::string> a, b;
    for (size_t i = 0; i < n; ++i) {
      require(labels_a[i] && labels_b[i], "label");
      a.emplace_back(labels_a[i]);
      b.emplace_back(labels_b[i]);
    }
    *kappa = tracklens::stats::cohens_kappa(a, b);
  });
}

}  // extern "C"
