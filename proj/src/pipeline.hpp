#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "census.hpp"
#include "csync.hpp"
#include "fingerprint.hpp"
#include "ingest.hpp"
#include "pixel.hpp"
#include "report.hpp"

namespace tracklens {

inline constexpr const char* kVersion = "0.3.0";

// Reference data shared by every command. Each loaded file is recorded with
// its content digest so run hashes change when the data does.
struct Resources {
  std::optional<SuffixSet> suffixes;
  std::optional<DisconnectMap> disconnect;
  std::optional<LabelSet> labels;
  std::optional<BaselineTable> baseline;
  Json sources = Json::object();  // kind -> {"path", "fnv1a"}

  void load_psl(const std::string& path);
  void load_disconnect(const std::string& path);
  void load_labels(const std::string& path);
  void load_baseline(const std::string& path);

  const SuffixSet& need_suffixes() const;
  const DisconnectMap& need_disconnect() const;
  const LabelSet& need_labels() const;
};

// Config file: JSON object. "psl", "disconnect", "labels" and "baseline" are
// paths, relative ones resolved against the config file's directory. The
// option keys of RunOptions may also be set there; flags override them.
struct ConfigFile {
  std::optional<std::string> psl, disconnect, labels, baseline;
  Json options = Json::object();
};
ConfigFile parse_config(std::string_view json_text, const std::string& base_dir);
ConfigFile load_config(const std::string& path);
void load_resources(Resources& res, const ConfigFile& config);

struct RunOptions {
  CsyncOptions csync;
  FingerprintOptions fingerprint;
  PixelOptions pixels;
  std::size_t top_k = 10;
  unsigned jobs = 1;  // never affects outputs
};

// Applies keys min_id_len, max_id_len, min_cookie_days, min_crawls,
// size_cap, min_canvas_width, min_canvas_height,
// require_text_before_extract, require_buffer_read, top_k, jobs. Unknown
// keys and out-of-range values throw kInvalidArgument.
void apply_options(RunOptions& options, const Json& values);
void set_option(RunOptions& options, std::string_view key, std::int64_t value);

struct RunOutput {
  std::string command;
  std::string config_hash;
  Json config;  // what was hashed
  std::vector<std::pair<std::string, std::string>> files;  // name -> contents
};

std::string corpus_digest(std::span<const CrawlTrace> traces);

RunOutput run_census(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options);
RunOutput run_csync(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options);
RunOutput run_fingerprint(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options);
RunOutput run_pixels(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options);
// Every section computed from the traces. Sections whose reference data is
// missing (no Disconnect list for the census) are marked absent.
RunOutput run_report(std::span<const CrawlTrace> traces, const Resources& res, const RunOptions& options);
// Report from section documents written by earlier runs.
RunOutput run_report(const ReportSections& sections);

// Reads census.json, csync.json, fingerprint_summary.json and
// pixel_summary.json from each directory, whichever exist. A section found
// in two directories throws kInvalidArgument.
ReportSections read_sections(const std::vector<std::string>& dirs);

// Writes the files plus manifest.json. `created_at` is the only field that
// differs between identical runs; pass nullopt to omit it.
void write_run(const RunOutput& run, const std::string& dir, std::optional<std::string> created_at);
std::string utc_timestamp();

}  // namespace tracklens
