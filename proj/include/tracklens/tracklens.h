#ifndef TRACKLENS_TRACKLENS_H
#define TRACKLENS_TRACKLENS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TRACKLENS_BUILDING)
#    define TL_API __declspec(dllexport)
#  else
#    define TL_API __declspec(dllimport)
#  endif
#else
#  define TL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tl_status {
  TL_OK = 0,
  TL_ERR_INVALID_ARGUMENT = 1,
  TL_ERR_IO = 2,
  TL_ERR_PARSE = 3,
  TL_ERR_FORMAT = 4,
  TL_ERR_NOT_FOUND = 5,
  TL_ERR_INCONSISTENT = 6,
  TL_ERR_INTERNAL = 7
} tl_status;

/* Reference data (suffix list, Disconnect list, labels, baseline) plus
   analysis options. */
typedef struct tl_context tl_context;
/* An in-memory set of crawl traces. */
typedef struct tl_corpus tl_corpus;

TL_API const char* tl_version(void);
TL_API const char* tl_status_name(tl_status status);

/* Message of the last failed call on this thread; "" when none. Valid until
   the next failing call on the same thread. */
TL_API const char* tl_last_error(void);

/* Strings returned through char** parameters are owned by the caller. */
TL_API void tl_string_free(char* s);

TL_API tl_status tl_context_create(tl_context** out);
TL_API void tl_context_destroy(tl_context* ctx);

/* JSON config: "psl", "disconnect", "labels", "baseline" paths (relative to
   the config file) plus option keys. Loads every listed file. */
TL_API tl_status tl_context_load_config(tl_context* ctx, const char* path);
TL_API tl_status tl_context_load_psl(tl_context* ctx, const char* path);
TL_API tl_status tl_context_load_disconnect(tl_context* ctx, const char* path);
TL_API tl_status tl_context_load_labels(tl_context* ctx, const char* path);
TL_API tl_status tl_context_load_baseline(tl_context* ctx, const char* path);

/* Keys: min_id_len, max_id_len, min_cookie_days, min_crawls, size_cap,
   min_canvas_width, min_canvas_height, require_text_before_extract,
   require_buffer_read, top_k, jobs. */
TL_API tl_status tl_context_set_option(tl_context* ctx, const char* key, int64_t value);
TL_API tl_status tl_context_get_option(const tl_context* ctx, const char* key, int64_t* out);

TL_API tl_status tl_corpus_create(tl_corpus** out);
TL_API void tl_corpus_destroy(tl_corpus* corpus);
TL_API size_t tl_corpus_size(const tl_corpus* corpus);
/* Appends the traces of a JSONL file. */
TL_API tl_status tl_corpus_read_jsonl(tl_corpus* corpus, const char* path);
TL_API tl_status tl_corpus_write_jsonl(const tl_corpus* corpus, const char* path);

typedef struct tl_visit_info {
  const char* site_id;   /* must be in the loaded labels */
  const char* platform;  /* "desktop" or "mobile"; NULL for desktop */
  const char* visit_id;  /* NULL: derived from crawl and site */
  const char* crawl_id;  /* NULL: "crawl-0" */
  int stateful;
  int visit_order;
  int64_t capture_time_ms;
} tl_visit_info;

/* Converts one capture into a trace and appends it. `warnings` (optional)
   receives the number of skipped or repaired records. */
TL_API tl_status tl_corpus_ingest_har(tl_context* ctx, tl_corpus* corpus, const char* path,
                                      const tl_visit_info* visit, size_t* warnings);
TL_API tl_status tl_corpus_ingest_cookies_txt(tl_context* ctx, tl_corpus* corpus, const char* path,
                                              const tl_visit_info* visit, size_t* warnings);

/* Schema check. Malformed cookie expiries are flags, not violations: the
   record is kept and only excluded from user-ID extraction. `report_jsonl`
   (optional) receives one JSON object per finding with its severity. */
TL_API tl_status tl_corpus_validate(const tl_corpus* corpus, size_t* violations, size_t* flags,
                                    char** report_jsonl);

/* Each writes its outputs and manifest.json under out_dir. */
TL_API tl_status tl_run_census(tl_context* ctx, const tl_corpus* corpus, const char* out_dir);
TL_API tl_status tl_run_csync(tl_context* ctx, const tl_corpus* corpus, const char* out_dir);
TL_API tl_status tl_run_fingerprint(tl_context* ctx, const tl_corpus* corpus, const char* out_dir);
TL_API tl_status tl_run_pixels(tl_context* ctx, const tl_corpus* corpus, const char* out_dir);
TL_API tl_status tl_run_report(tl_context* ctx, const tl_corpus* corpus, const char* out_dir);
/* Report from the section files earlier runs left in `dirs`. */
TL_API tl_status tl_run_report_from_dirs(tl_context* ctx, const char* const* dirs, size_t n_dirs,
                                         const char* out_dir);

/* Planted corpus. `spec_json` NULL uses the built-in spec. When has_seed is
   non-zero `seed` replaces the spec's seed. Writes traces.jsonl,
   truth.json, spec.json and labels.csv to out_dir; `corpus` (optional)
   receives the traces. */
TL_API tl_status tl_synth_generate(const char* spec_json, int has_seed, uint64_t seed, const char* out_dir,
                                   tl_corpus* corpus);

TL_API tl_status tl_registrable_domain(const tl_context* ctx, const char* url_or_host, char** out);
TL_API tl_status tl_ks_test(const double* a, size_t n_a, const double* b, size_t n_b, double* statistic,
                            double* p_value);
TL_API tl_status tl_cohens_kappa(const char* const* labels_a, const char* const* labels_b, size_t n,
                                 double* kappa);

#ifdef __cplusplus
}
#endif

#endif
