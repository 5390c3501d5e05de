#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqlcd/common.hpp"

namespace seqlcd {

/// Finite, ordered set of appearance conditions. Labels are identified by
/// their position in the set.
class ConditionSet {
 public:
  ConditionSet() : ConditionSet({"sunny", "foggy", "rainy"}) {}
  explicit ConditionSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw Error("condition set must not be empty");
    for (std::size_t i = 0; i < names_.size(); ++i)
      for (std::size_t j = i + 1; j < names_.size(); ++j)
        if (names_[i] == names_[j]) throw Error("duplicate condition name '" + names_[i] + "'");
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return std::nullopt;
  }

  bool operator==(const ConditionSet&) const = default;

 private:
  std::vector<std::string> names_;
};

struct ConditionLabel {
  std::string name;
  std::size_t index = 0;

  bool operator==(const ConditionLabel&) const = default;
};

inline ConditionLabel make_condition(const ConditionSet& set, const std::string& name) {
  auto idx = set.index_of(name);
  if (!idx) throw Error("unknown condition '" + name + "'");
  return {name, *idx};
}

struct Frame {
  std::size_t id = 0;
  std::string image_path;
  double position = 0.0;
  ConditionLabel condition;

  bool operator==(const Frame&) const = default;
};

struct SequenceManifest {
  std::string route_id;
  ConditionLabel condition;
  std::vector<Frame> frames;
  std::optional<std::string> descriptor_ref;

  std::size_t size() const { return frames.size(); }
  bool operator==(const SequenceManifest&) const = default;
};

/// Test frame -> reference frame correspondence. An empty slot means the
/// test frame has no true match in the reference route.
struct GroundTruthAlignment {
  std::vector<std::optional<std::size_t>> pairs;
  int d_thresh = 20;

  std::size_t matched_count() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.has_value();
    return n;
  }
};

/// Throws if the manifest breaks any of its invariants.
inline void validate_manifest(const SequenceManifest& m) {
  if (m.frames.empty()) throw Error("manifest '" + m.route_id + "' has no frames");
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const Frame& f = m.frames[i];
    if (f.id != i) {
      throw Error("frame ids must be consecutive from 0: expected " + std::to_string(i) +
                  ", found " + std::to_string(f.id));
    }
    if (!std::isfinite(f.position)) throw Error("frame " + std::to_string(i) + ": non-finite position");
    if (i > 0 && f.position < m.frames[i - 1].position)
      throw Error("non-monotone position at frame " + std::to_string(i));
    if (f.condition != m.condition) throw Error("frame " + std::to_string(i) + ": condition differs from manifest");
  }
}

inline nlohmann::json manifest_to_json(const SequenceManifest& m) {
  nlohmann::json frames = nlohmann::json::array();
  for (const Frame& f : m.frames)
    frames.push_back({{"id", f.id}, {"file", f.image_path}, {"position", f.position}});
  nlohmann::json j;
  j["route_id"] = m.route_id;
  j["condition"] = m.condition.name;
  j["frames"] = std::move(frames);
  j["descriptor_ref"] = m.descriptor_ref ? nlohmann::json(*m.descriptor_ref) : nlohmann::json(nullptr);
  return j;
}

inline SequenceManifest manifest_from_json(const nlohmann::json& j, const ConditionSet& conditions = {}) {
  auto field = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key)) throw Error(std::string("manifest: missing field '") + key + "'");
    return j.at(key);
  };
  SequenceManifest m;
  const auto& route = field("route_id");
  const auto& cond = field("condition");
  const auto& frames = field("frames");
  if (!route.is_string()) throw Error("manifest: route_id must be a string");
  if (!cond.is_string()) throw Error("manifest: condition must be a string");
  if (!frames.is_array()) throw Error("manifest: frames must be an array");
  m.route_id = route.get<std::string>();
  m.condition = make_condition(conditions, cond.get<std::string>());
  if (j.contains("descriptor_ref") && !j["descriptor_ref"].is_null()) {
    if (!j["descriptor_ref"].is_string()) throw Error("manifest: descriptor_ref must be a string or null");
    m.descriptor_ref = j["descriptor_ref"].get<std::string>();
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& fj = frames[i];
    std::string where = "manifest: frames[" + std::to_string(i) + "]";
    if (!fj.is_object() || !fj.contains("id") || !fj.contains("file") || !fj.contains("position"))
      throw Error(where + " needs id, file and position");
    if (!fj["id"].is_number_integer() || fj["id"].get<long long>() < 0)
      throw Error(where + ".id must be a non-negative integer");
    if (!fj["file"].is_string()) throw Error(where + ".file must be a string");
    if (!fj["position"].is_number()) throw Error(where + ".position must be a number");
    Frame f;
    f.id = fj["id"].get<std::size_t>();
    f.image_path = fj["file"].get<std::string>();
    f.position = fj["position"].get<double>();
    f.condition = m.condition;
    m.frames.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < m.frames.size(); ++i)
    for (std::size_t k = i + 1; k < m.frames.size(); ++k)
      if (m.frames[i].id == m.frames[k].id) throw Error("duplicate frame id " + std::to_string(m.frames[i].id));
  validate_manifest(m);
  return m;
}

/// Canonical text form: sorted keys, two-space indent, trailing newline.
inline std::string dump_manifest(const SequenceManifest& m) {
  validate_manifest(m);
  return manifest_to_json(m).dump(2) + "\n";
}

inline void save_manifest(const SequenceManifest& m, const std::string& path) {
  write_file(path, dump_manifest(m));
}

/// Resolves a frame's image path relative to the directory holding the manifest.
inline std::string resolve_frame_path(const std::string& manifest_path, const Frame& f) {
  std::filesystem::path p(f.image_path);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(manifest_path).parent_path() / p).string();
}

inline SequenceManifest load_manifest(const std::string& path, const ConditionSet& conditions = {},
                                      bool require_images = false) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("manifest '" + path + "': parse error: " + e.what());
  }
  SequenceManifest m = manifest_from_json(j, conditions);
  if (require_images) {
    for (const Frame& f : m.frames) {
      std::string p = resolve_frame_path(path, f);
      if (!std::filesystem::exists(p)) throw Error("manifest '" + path + "': missing image '" + p + "'");
    }
  }
  return m;
}

/// Mean spacing between consecutive reference positions; zero for a
/// single-frame route.
inline double mean_spacing(const SequenceManifest& m) {
  if (m.frames.size() < 2) return 0.0;
  return (m.frames.back().position - m.frames.front().position) / static_cast<double>(m.frames.size() - 1);
}

/// Maps each test frame to the reference frame with the nearest position.
///
/// A test frame is left unmatched when its nearest reference position lies
/// further away than d_thresh mean reference spacings. Equidistant
/// candidates resolve to the lower reference id.
inline GroundTruthAlignment align_ground_truth(const SequenceManifest& ref, const SequenceManifest& test,
                                               int d_thresh = 20) {
  if (ref.frames.empty()) throw Error("align_ground_truth: empty reference manifest");
  if (d_thresh <= 0) throw Error("align_ground_truth: d_thresh must be positive");
  GroundTruthAlignment gt;
  gt.d_thresh = d_thresh;
  gt.pairs.resize(test.frames.size());
  const double tolerance = d_thresh * mean_spacing(ref);
  const auto& rf = ref.frames;
  for (std::size_t t = 0; t < test.frames.size(); ++t) {
    const double p = test.frames[t].position;
    auto it = std::lower_bound(rf.begin(), rf.end(), p,
                               [](const Frame& f, double v) { return f.position < v; });
    std::size_t best;
    if (it == rf.end()) {
      best = rf.size() - 1;
    } else {
      best = static_cast<std::size_t>(it - rf.begin());
      if (best > 0) {
        // Lowest id among frames sharing the predecessor's position.
        std::size_t prev = best - 1;
        while (prev > 0 && rf[prev - 1].position == rf[prev].position) --prev;
        if (p - rf[prev].position <= rf[best].position - p) best = prev;
      }
    }
    while (best > 0 && rf[best - 1].position == rf[best].position) --best;
    if (std::abs(rf[best].position - p) <= tolerance) gt.pairs[t] = best;
  }
  return gt;
}

}  // namespace seqlcd
