#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqlcd/common.hpp"
#include "seqlcd/descriptor.hpp"
#include "seqlcd/diffmatrix.hpp"
#include "seqlcd/eval.hpp"
#include "seqlcd/imaging.hpp"
#include "seqlcd/matcher.hpp"
#include "seqlcd/model.hpp"
#include "seqlcd/synthgen.hpp"

namespace seqlcd {

/// Configuration of an end-to-end matching run.
struct RunConfig {
  std::string ref_manifest;
  std::string test_manifest;
  DescriptorKind descriptor = DescriptorKind::Sad;
  SadConfig sad;
  std::string latents_ref;
  std::string latents_test;
  EnhanceConfig enhance;
  MatcherParams matcher;
  int d_thresh = 20;
  std::string out_dir;
  unsigned threads = 0;
  std::vector<std::string> conditions = {"sunny", "foggy", "rainy"};

  void validate() const {
    if (ref_manifest.empty()) throw Error("config: ref: reference manifest path is required");
    if (test_manifest.empty()) throw Error("config: test: test manifest path is required");
    sad.validate();
    enhance.validate();
    matcher.validate();
    if (d_thresh <= 0) throw Error("config: d_thresh: must be positive");
    ConditionSet check(conditions);
  }
};

namespace detail {

// Typed field access that reports the JSON path of the offending field.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: " + where() + "must be an object");
  }

  template <typename T>
  std::optional<T> get(const char* key) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw Error("expected a string");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw Error("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw Error("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.get<long long>() < 0) throw Error("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw Error("expected a number");
      }
      return v.get<T>();
    } catch (const Error& e) {
      throw Error("config: " + path_ + key + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error("config: " + path_ + key + ": " + e.what());
    }
  }

  template <typename T>
  T require(const char* key) const {
    auto v = get<T>(key);
    if (!v) throw Error("config: " + path_ + key + ": missing required field");
    return *v;
  }

  template <typename T>
  void set(const char* key, T& target) const {
    if (auto v = get<T>(key)) target = *v;
  }

  std::optional<Fields> object(const char* key) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return Fields(j_.at(key), path_ + key + ".");
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& item : j_.items()) {
      bool ok = false;
      for (const char* a : allowed) ok |= item.key() == a;
      if (!ok) throw Error("config: " + path_ + item.key() + ": unknown field");
    }
  }

  const nlohmann::json& json() const { return j_; }
  std::string where() const { return path_.empty() ? "" : path_.substr(0, path_.size() - 1) + ": "; }
  const std::string& path() const { return path_; }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base_dir) / p).string();
}

inline DescriptorKind parse_kind(const std::string& s) {
  if (s == "sad") return DescriptorKind::Sad;
  if (s == "latent") return DescriptorKind::Latent;
  throw Error("config: descriptor: expected 'sad' or 'latent', got '" + s + "'");
}

inline nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("'" + path + "': parse error: " + e.what());
  }
}

}  // namespace detail

/// Reads a run configuration object. Relative paths resolve against
/// base_dir (normally the config file's directory).
inline RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  detail::Fields f(j, "");
  f.only({"ref", "test", "descriptor", "sad", "latents_ref", "latents_test", "enhance", "matcher", "d_thresh", "out",
          "threads", "conditions"});
  RunConfig c;
  if (auto v = f.get<std::string>("ref")) c.ref_manifest = detail::resolve_path(base_dir, *v);
  if (auto v = f.get<std::string>("test")) c.test_manifest = detail::resolve_path(base_dir, *v);
  if (auto v = f.get<std::string>("descriptor")) c.descriptor = detail::parse_kind(*v);
  if (auto v = f.get<std::string>("latents_ref")) c.latents_ref = detail::resolve_path(base_dir, *v);
  if (auto v = f.get<std::string>("latents_test")) c.latents_test = detail::resolve_path(base_dir, *v);
  if (auto v = f.get<std::string>("out")) c.out_dir = detail::resolve_path(base_dir, *v);
  f.set("d_thresh", c.d_thresh);
  f.set("threads", c.threads);
  f.set("conditions", c.conditions);
  if (auto s = f.object("sad")) {
    s->only({"out_w", "out_h", "patch", "epsilon"});
    s->set("out_w", c.sad.out_w);
    s->set("out_h", c.sad.out_h);
    s->set("patch", c.sad.patch);
    s->set("epsilon", c.sad.epsilon);
  }
  if (auto e = f.object("enhance")) {
    e->only({"window_radius", "epsilon"});
    e->set("window_radius", c.enhance.window_radius);
    e->set("epsilon", c.enhance.epsilon);
  }
  if (auto m = f.object("matcher")) {
    m->only({"d_s", "v_min", "v_max", "v_step", "score_threshold"});
    m->set("d_s", c.matcher.d_s);
    m->set("v_min", c.matcher.v_min);
    m->set("v_max", c.matcher.v_max);
    m->set("v_step", c.matcher.v_step);
    m->set("score_threshold", c.matcher.score_threshold);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(detail::parse_json_file(path), std::filesystem::path(path).parent_path().string());
}

/// Parameters echoed into every report.
inline nlohmann::json params_echo(const RunConfig& c) {
  nlohmann::json j;
  j["descriptor"] = to_string(c.descriptor);
  j["metric"] = to_string(default_metric(c.descriptor));
  if (c.descriptor == DescriptorKind::Sad)
    j["sad"] = {{"out_w", c.sad.out_w}, {"out_h", c.sad.out_h}, {"patch", c.sad.patch}, {"epsilon", c.sad.epsilon}};
  j["enhance"] = {{"window_radius", c.enhance.window_radius}, {"epsilon", c.enhance.epsilon}};
  j["matcher"] = {{"d_s", c.matcher.d_s},
                  {"v_min", c.matcher.v_min},
                  {"v_max", c.matcher.v_max},
                  {"v_step", c.matcher.v_step},
                  {"score_threshold", c.matcher.score_threshold}};
  j["d_thresh"] = c.d_thresh;
  return j;
}

struct StageTimes {
  double describe_ms = 0;
  double describe_per_frame_ms = 0;
  double diff_ms = 0;
  double enhance_ms = 0;
  double match_ms = 0;
  double eval_ms = 0;

  nlohmann::json to_json() const {
    return {{"describe_ms", describe_ms}, {"describe_per_frame_ms", describe_per_frame_ms},
            {"diff_ms", diff_ms},         {"enhance_ms", enhance_ms},
            {"match_ms", match_ms},       {"eval_ms", eval_ms}};
  }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// SAD descriptors for every frame of a manifest loaded from manifest_path.
inline DescriptorSet describe_manifest(const std::string& manifest_path, const SequenceManifest& m,
                                       const SadConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  std::vector<Descriptor> rows(m.frames.size());
  parallel_for(m.frames.size(), threads, [&](std::size_t i) {
    rows[i] = sad_descriptor(decode_image(resolve_frame_path(manifest_path, m.frames[i])), cfg);
  });
  return DescriptorSet::from_rows(rows, DescriptorKind::Sad);
}

struct PipelineResult {
  SequenceManifest ref;
  SequenceManifest test;
  DescriptorSet ref_desc;
  DescriptorSet test_desc;
  DifferenceMatrix raw;
  DifferenceMatrix enhanced;
  std::vector<MatchCandidate> candidates;
  GroundTruthAlignment gt;
  EvalReport report;
  StageTimes times;
};

namespace detail {

inline DescriptorSet load_descriptors(const RunConfig& c, const std::string& manifest_path, const SequenceManifest& m,
                                      const std::string& latents_path) {
  if (c.descriptor == DescriptorKind::Sad) return describe_manifest(manifest_path, m, c.sad, c.threads);
  std::string path = latents_path;
  if (path.empty() && m.descriptor_ref)
    path = resolve_frame_path(manifest_path, Frame{0, *m.descriptor_ref, 0.0, m.condition});
  if (path.empty()) throw Error("no latent file given for manifest '" + manifest_path + "'");
  DescriptorSet set = read_latents(path);
  if (set.count() != m.size())
    throw Error("latent file '" + path + "' has " + std::to_string(set.count()) + " codes but manifest has " +
                std::to_string(m.size()) + " frames");
  return set;
}

}  // namespace detail

/// Loads both manifests and their descriptors.
inline PipelineResult load_inputs(const RunConfig& c) {
  c.validate();
  const ConditionSet conditions(c.conditions);
  PipelineResult r;
  r.ref = load_manifest(c.ref_manifest, conditions, c.descriptor == DescriptorKind::Sad);
  r.test = load_manifest(c.test_manifest, conditions, c.descriptor == DescriptorKind::Sad);
  detail::Stopwatch sw;
  r.ref_desc = detail::load_descriptors(c, c.ref_manifest, r.ref, c.latents_ref);
  r.test_desc = detail::load_descriptors(c, c.test_manifest, r.test, c.latents_test);
  r.times.describe_ms = sw.ms();
  r.times.describe_per_frame_ms = r.times.describe_ms / static_cast<double>(r.ref.size() + r.test.size());
  return r;
}

/// describe -> diff -> enhance -> match -> eval, entirely in memory.
inline PipelineResult run_pipeline(const RunConfig& c) {
  PipelineResult r = load_inputs(c);
  detail::Stopwatch sw;
  r.raw = compute_difference_matrix(r.ref_desc, r.test_desc, default_metric(c.descriptor), c.threads);
  r.times.diff_ms = sw.ms();
  sw = {};
  r.enhanced = enhance_local(r.raw, c.enhance, c.threads);
  r.times.enhance_ms = sw.ms();
  sw = {};
  r.candidates = search_matches(r.enhanced, c.matcher, c.threads);
  r.times.match_ms = sw.ms();
  sw = {};
  r.gt = align_ground_truth(r.ref, r.test, c.d_thresh);
  r.report = build_report(r.candidates, r.gt, c.matcher.score_threshold, params_echo(c));
  r.times.eval_ms = sw.ms();
  return r;
}

inline void write_report_files(const EvalReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  emit_report(report, (fs::path(dir) / "report.json").string(), ReportFormat::Json);
  emit_report(report, (fs::path(dir) / "report.csv").string(), ReportFormat::Csv);
  emit_plot(report, (fs::path(dir) / "report.svg").string());
}

inline void write_matrices(const PipelineResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  write_file((fs::path(dir) / "diff_raw.bin").string(), matrix_to_binary(r.raw));
  write_file((fs::path(dir) / "diff_enhanced.bin").string(), matrix_to_binary(r.enhanced));
  write_file((fs::path(dir) / "diff_raw.csv").string(), matrix_to_csv(r.raw));
  write_file((fs::path(dir) / "diff_enhanced.csv").string(), matrix_to_csv(r.enhanced));
}

/// Full run. Everything is computed before anything is written, so a
/// failing run leaves no report behind.
inline PipelineResult cmd_run(const RunConfig& c, std::ostream* log = nullptr) {
  if (c.out_dir.empty()) throw Error("config: out: output directory is required");
  PipelineResult r = run_pipeline(c);
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);
  write_matrices(r, c.out_dir);
  write_file((fs::path(c.out_dir) / "candidates.csv").string(), candidates_to_csv(r.candidates));
  write_file((fs::path(c.out_dir) / "timing.json").string(), r.times.to_json().dump(2) + "\n");
  write_report_files(r.report, c.out_dir);
  if (log) {
    *log << "describe: " << r.times.describe_ms << " ms (" << r.times.describe_per_frame_ms << " ms/frame), diff: "
         << r.times.diff_ms << " ms, enhance: " << r.times.enhance_ms << " ms, match: " << r.times.match_ms
         << " ms, eval: " << r.times.eval_ms << " ms\n";
    for (const auto& w : r.report.warnings) *log << "warning: " << w << "\n";
  }
  return r;
}

/// Re-scores a candidate list against the manifests' ground truth.
inline EvalReport cmd_eval(const RunConfig& c, const std::string& candidates_csv, std::ostream* log = nullptr) {
  c.validate();
  const ConditionSet conditions(c.conditions);
  const SequenceManifest ref = load_manifest(c.ref_manifest, conditions);
  const SequenceManifest test = load_manifest(c.test_manifest, conditions);
  const auto candidates = candidates_from_csv(read_file(candidates_csv));
  const GroundTruthAlignment gt = align_ground_truth(ref, test, c.d_thresh);
  EvalReport report = build_report(candidates, gt, c.matcher.score_threshold, params_echo(c));
  if (!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    write_report_files(report, c.out_dir);
  }
  if (log)
    for (const auto& w : report.warnings) *log << "warning: " << w << "\n";
  return report;
}

/// Route entry of a synth config: one pass rendered under each listed
/// condition.
struct RouteConfig {
  SequenceSpec spec;
  std::vector<std::string> conditions;  // empty: every world condition
  std::string reference;                // route the warp table refers to
};

struct SynthConfig {
  WorldConfig world;
  std::vector<RouteConfig> routes;
  unsigned threads = 0;
};

inline SynthConfig synth_config_from_json(const nlohmann::json& j, std::optional<std::uint64_t> seed_override = {}) {
  detail::Fields f(j, "");
  f.only({"world", "routes", "threads"});
  SynthConfig c;
  f.set("threads", c.threads);
  auto w = f.object("world");
  if (!w) throw Error("config: world: missing required field");
  w->only({"seed", "n_landmarks", "width", "height", "route_length", "pixels_per_unit", "conditions"});
  c.world.seed = seed_override ? *seed_override : w->require<std::uint64_t>("seed");
  w->set("n_landmarks", c.world.n_landmarks);
  w->set("width", c.world.width);
  w->set("height", c.world.height);
  w->set("route_length", c.world.route_length);
  w->set("pixels_per_unit", c.world.pixels_per_unit);
  w->set("conditions", c.world.conditions);
  c.world.validate();
  if (!j.contains("routes") || !j["routes"].is_array() || j["routes"].empty())
    throw Error("config: routes: expected a non-empty array");
  for (std::size_t i = 0; i < j["routes"].size(); ++i) {
    detail::Fields r(j["routes"][i], "routes[" + std::to_string(i) + "].");
    r.only({"name", "n_frames", "start", "end", "velocity_ratio", "noise_seed", "conditions", "reference"});
    RouteConfig rc;
    rc.spec.name = r.require<std::string>("name");
    rc.spec.n_frames = r.require<std::size_t>("n_frames");
    rc.spec.start = r.require<double>("start");
    rc.spec.end = r.require<double>("end");
    r.set("velocity_ratio", rc.spec.velocity_ratio);
    r.set("noise_seed", rc.spec.noise_seed);
    r.set("conditions", rc.conditions);
    r.set("reference", rc.reference);
    if (rc.spec.start < 0 || rc.spec.end > c.world.route_length)
      throw Error("config: routes[" + std::to_string(i) + "]: span outside world route_length");
    try {
      rc.spec.validate();
    } catch (const Error& e) {
      throw Error("config: routes[" + std::to_string(i) + "]: " + e.what());
    }
    c.routes.push_back(rc);
  }
  for (std::size_t i = 0; i < c.routes.size(); ++i) {
    auto& rc = c.routes[i];
    if (rc.reference.empty()) continue;
    bool found = false;
    for (const auto& other : c.routes) found |= other.spec.name == rc.reference;
    if (!found)
      throw Error("config: routes[" + std::to_string(i) + "].reference: unknown route '" + rc.reference + "'");
  }
  return c;
}

/// Writes <out>/<route>/<condition>/{manifest.json, warp.json, frames/}.
/// Returns the manifest paths in generation order.
inline std::vector<std::string> cmd_synth(const SynthConfig& c, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const World world = generate_world(c.world);
  std::vector<std::string> manifests;
  for (const auto& rc : c.routes) {
    std::optional<SequenceSpec> reference;
    if (!rc.reference.empty())
      for (const auto& other : c.routes)
        if (other.spec.name == rc.reference) reference = other.spec;
    const auto& conds = rc.conditions.empty() ? c.world.conditions : rc.conditions;
    for (const auto& cond : conds) {
      SequenceSpec spec = rc.spec;
      spec.condition = cond;
      const auto gen = generate_sequence(world, spec, reference, c.threads);
      const auto dir = (fs::path(out_dir) / rc.spec.name / cond).string();
      write_sequence(gen, dir);
      manifests.push_back((fs::path(dir) / "manifest.json").string());
    }
  }
  return manifests;
}

}  // namespace seqlcd
