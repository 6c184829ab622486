#pragma once

// Knob domains, fidelity/coding options and the richer-than partial order.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "vidplan/error.hpp"

namespace vidplan {

/// One knob: labels ordered from poorest (index 0) to richest, plus a numeric
/// annotation per value that drives the cost models.
struct KnobDomain {
  std::string name;
  std::vector<std::string> labels;
  std::vector<double> values;

  std::size_t size() const { return labels.size(); }
  int richest() const { return static_cast<int>(labels.size()) - 1; }

  void validate() const {
    if (labels.empty()) {
      throw Error(ErrorCode::ConfigError, "knob '" + name + "' has no values");
    }
    if (labels.size() != values.size()) {
      throw Error(ErrorCode::ConfigError,
                  "knob '" + name + "' label/annotation count mismatch");
    }
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (!(values[i] > values[i - 1])) {
        throw Error(ErrorCode::ConfigError,
                    "knob '" + name + "' annotations must strictly increase");
      }
    }
  }

  /// Position of `index` mapped onto [0,1]; single-valued knobs sit at 1.
  double normalized(int index) const {
    if (size() <= 1) return 1.0;
    return static_cast<double>(index) / static_cast<double>(size() - 1);
  }

  int index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      throw Error(ErrorCode::DomainMismatch,
                  "knob '" + name + "' has no value '" + label + "'");
    }
    return static_cast<int>(it - labels.begin());
  }

  bool contains(int index) const {
    return index >= 0 && index < static_cast<int>(size());
  }
};

struct FidelityOption {
  int sampling = 0;
  int resolution = 0;
  int crop = 0;
  int quality = 0;

  auto operator<=>(const FidelityOption&) const = default;
};

/// Encoder knobs. Raw storage (bypass) ignores the other two knobs; use
/// canonical() before comparing or hashing.
struct CodingOption {
  int speed_step = 0;
  int keyframe = 0;
  bool bypass = false;

  static CodingOption raw() { return {0, 0, true}; }

  CodingOption canonical() const { return bypass ? raw() : *this; }

  auto operator<=>(const CodingOption&) const = default;
};

struct StorageFormat {
  FidelityOption fidelity;
  CodingOption coding;

  auto operator<=>(const StorageFormat&) const = default;
};

struct ConsumptionFormat {
  FidelityOption fidelity;

  auto operator<=>(const ConsumptionFormat&) const = default;
};

struct Consumer {
  std::string operator_id;
  double target_accuracy = 1.0;

  auto operator<=>(const Consumer&) const = default;
};

enum class Ordering { Richer, Equal, Poorer, Incomparable };

inline const char* to_string(Ordering o) {
  switch (o) {
    case Ordering::Richer: return "Richer";
    case Ordering::Equal: return "Equal";
    case Ordering::Poorer: return "Poorer";
    case Ordering::Incomparable: return "Incomparable";
  }
  return "?";
}

/// The full knob space. Sampling annotations are fractions of the ingested
/// frame rate, resolution annotations pixel counts, crop annotations kept
/// area fractions, quality annotations ranks, speed-step annotations relative
/// encoder speed, keyframe annotations the keyframe interval in stored frames.
struct KnobSpace {
  KnobDomain sampling;
  KnobDomain resolution;
  KnobDomain crop;
  KnobDomain quality;
  KnobDomain speed_step;
  KnobDomain keyframe;

  void validate() const {
    for (const auto* d : {&sampling, &resolution, &crop, &quality, &speed_step,
                          &keyframe}) {
      d->validate();
    }
  }

  bool contains(const FidelityOption& f) const {
    return sampling.contains(f.sampling) && resolution.contains(f.resolution) &&
           crop.contains(f.crop) && quality.contains(f.quality);
  }

  bool contains(const CodingOption& c) const {
    if (c.bypass) return true;
    return speed_step.contains(c.speed_step) && keyframe.contains(c.keyframe);
  }

  std::size_t fidelity_count() const {
    return sampling.size() * resolution.size() * crop.size() * quality.size();
  }

  std::size_t encoded_coding_count() const {
    return speed_step.size() * keyframe.size();
  }

  /// |F| * (|C_encoded| + 1): every encoded coding plus one raw variant.
  std::size_t format_count() const {
    return fidelity_count() * (encoded_coding_count() + 1);
  }

  FidelityOption richest() const {
    return {sampling.richest(), resolution.richest(), crop.richest(),
            quality.richest()};
  }

  FidelityOption poorest() const { return {0, 0, 0, 0}; }

  /// Dense index of a fidelity option, quality varying fastest.
  std::size_t fidelity_index(const FidelityOption& f) const {
    return ((static_cast<std::size_t>(f.sampling) * resolution.size() +
             static_cast<std::size_t>(f.resolution)) *
                crop.size() +
            static_cast<std::size_t>(f.crop)) *
               quality.size() +
           static_cast<std::size_t>(f.quality);
  }

  std::size_t coding_index(const CodingOption& c) const {
    if (c.bypass) return encoded_coding_count();
    return static_cast<std::size_t>(c.speed_step) * keyframe.size() +
           static_cast<std::size_t>(c.keyframe);
  }

  std::vector<FidelityOption> fidelities() const {
    std::vector<FidelityOption> out;
    out.reserve(fidelity_count());
    for (int s = 0; s < static_cast<int>(sampling.size()); ++s)
      for (int r = 0; r < static_cast<int>(resolution.size()); ++r)
        for (int c = 0; c < static_cast<int>(crop.size()); ++c)
          for (int q = 0; q < static_cast<int>(quality.size()); ++q)
            out.push_back({s, r, c, q});
    return out;
  }

  /// Encoded codings first (speed step major), then the single raw option.
  std::vector<CodingOption> codings() const {
    std::vector<CodingOption> out;
    out.reserve(encoded_coding_count() + 1);
    for (int s = 0; s < static_cast<int>(speed_step.size()); ++s)
      for (int k = 0; k < static_cast<int>(keyframe.size()); ++k)
        out.push_back({s, k, false});
    out.push_back(CodingOption::raw());
    return out;
  }

  /// Label such as "good-50%-720p-1/2" (quality-crop-resolution-sampling).
  std::string describe(const FidelityOption& f) const {
    return quality.labels.at(f.quality) + "-" + crop.labels.at(f.crop) + "-" +
           resolution.labels.at(f.resolution) + "-" +
           sampling.labels.at(f.sampling);
  }

  std::string describe(const CodingOption& c) const {
    if (c.bypass) return "raw";
    return speed_step.labels.at(c.speed_step) + "/kf" +
           keyframe.labels.at(c.keyframe);
  }

  std::string describe(const StorageFormat& sf) const {
    return describe(sf.fidelity) + "|" + describe(sf.coding);
  }

  /// Normalized fidelity coordinates used by distance-based coalescing.
  std::array<double, 4> coordinates(const FidelityOption& f) const {
    return {sampling.normalized(f.sampling), resolution.normalized(f.resolution),
            crop.normalized(f.crop), quality.normalized(f.quality)};
  }
};

/// Defaults: five sampling rates, five resolutions, three crop factors, four
/// quality levels, five speed steps and five keyframe intervals.
inline KnobSpace default_knob_space() {
  KnobSpace k;
  k.sampling = {"sampling", {"1/30", "1/10", "1/5", "1/2", "1"},
                {1.0 / 30.0, 0.1, 0.2, 0.5, 1.0}};
  k.resolution = {"resolution", {"180p", "360p", "540p", "720p", "1080p"},
                  {320.0 * 180, 640.0 * 360, 960.0 * 540, 1280.0 * 720,
                   1920.0 * 1080}};
  k.crop = {"crop", {"25%", "50%", "100%"}, {0.25, 0.5, 1.0}};
  k.quality = {"quality", {"bad", "fair", "good", "best"}, {1, 2, 3, 4}};
  k.speed_step = {"speed_step",
                  {"veryslow", "slow", "medium", "fast", "ultrafast"},
                  {1, 3, 8, 20, 40}};
  k.keyframe = {"keyframe", {"5", "10", "30", "60", "120"},
                {5, 10, 30, 60, 120}};
  return k;
}

inline Ordering compare_fidelity(const FidelityOption& a,
                                 const FidelityOption& b) {
  const std::array<int, 4> da{a.sampling, a.resolution, a.crop, a.quality};
  const std::array<int, 4> db{b.sampling, b.resolution, b.crop, b.quality};
  bool some_greater = false;
  bool some_less = false;
  for (std::size_t i = 0; i < da.size(); ++i) {
    if (da[i] > db[i]) some_greater = true;
    if (da[i] < db[i]) some_less = true;
  }
  if (!some_greater && !some_less) return Ordering::Equal;
  if (some_greater && !some_less) return Ordering::Richer;
  if (!some_greater && some_less) return Ordering::Poorer;
  return Ordering::Incomparable;
}

/// True when `dst` can be produced from `src` by degrading fidelity.
inline bool can_degrade(const FidelityOption& src, const FidelityOption& dst) {
  const auto o = compare_fidelity(src, dst);
  return o == Ordering::Richer || o == Ordering::Equal;
}

inline FidelityOption knobwise_max(const FidelityOption& a,
                                   const FidelityOption& b) {
  return {std::max(a.sampling, b.sampling), std::max(a.resolution, b.resolution),
          std::max(a.crop, b.crop), std::max(a.quality, b.quality)};
}

/// Every storage format exactly once; raw coding appears once per fidelity.
inline std::vector<StorageFormat> enumerate_formats(const KnobSpace& space) {
  std::vector<StorageFormat> out;
  out.reserve(space.format_count());
  const auto codings = space.codings();
  for (const auto& f : space.fidelities()) {
    for (const auto& c : codings) out.push_back({f, c});
  }
  return out;
}

}  // namespace vidplan
