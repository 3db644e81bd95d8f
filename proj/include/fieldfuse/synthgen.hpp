#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fieldfuse/ingest.hpp"

namespace fieldfuse {

using BandMeans = std::array<double, kBandCount>;

struct SynthSpec {
  std::uint64_t seed = 1;
  int n_classes = 7;
  int n_fields = 200;
  int min_field_pixels = 50;
  int max_field_pixels = 400;
  int grid_width = 420;  // 10 m pixels; multiples of 6 allow native resolutions
  int grid_height = 420;
  double sigma = 150.0;       // per-pixel noise, DN
  double field_sigma = 0.0;   // per-field, per-band offset noise, DN
  double mean_low = 500.0;    // class means drawn uniformly in [low, high] DN
  double mean_high = 4500.0;
  double class_imbalance = 0.0; // class c drawn with weight exp(-imbalance * c)
  bool native_resolutions = false; // store 20/60 m bands block-averaged
  std::optional<std::vector<BandMeans>> class_means;
};

struct SynthScene {
  SceneBundle scene;
  FieldSet fields;
  std::vector<BandMeans> class_means;
  // Rasterized pixel count per generated field (width * height of its rectangle).
  std::vector<int> field_pixels;
};

SynthScene generate(const SynthSpec& spec);

// Crop names used for synthetic classes: the seven retained crop classes,
// then "Crop07", "Crop08", ...
std::vector<std::string> synthetic_class_names(int n_classes);

} // namespace fieldfuse
