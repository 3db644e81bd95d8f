#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "fieldfuse/ingest.hpp"

namespace fieldfuse {

// Sentinel-2 band order used for the first 13 feature channels.
inline const std::array<std::string, kBandCount> kBandNames = {
    "B01", "B02", "B03", "B04", "B05", "B06", "B07",
    "B08", "B8A", "B09", "B10", "B11", "B12"};
inline const std::array<std::string, 4> kIndexNames = {"NDVI", "EVI", "NDRE", "MSAVI"};

// Native Sentinel-2 resolution per band name (10, 20 or 60 m).
int native_resolution(std::string_view band_name);

struct RealGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
};

// Pixel-center aligned bilinear upsampling with clamp-to-edge. The source
// resolution must be a multiple of the target resolution.
RealGrid upsample_bilinear(const BandRaster& band, int target_resolution_m = 10);

struct IndexValues {
  double ndvi = 0.0;
  double evi = 0.0;
  double ndre = 0.0;
  double msavi = 0.0;
};

// Reflectances (DN / 10000) in, indices out; degenerate pixels yield 0.
IndexValues compute_indices(double blue, double red, double red_edge, double nir);

struct FeatureStack {
  int width = 0;
  int height = 0;
  GeoTransform geo;
  std::vector<std::string> channels;
  std::vector<std::vector<double>> values; // [channel][pixel]

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  int channel_count() const { return static_cast<int>(channels.size()); }
};

// Upsamples every band to 10 m, orders them canonically and appends
// NDVI, EVI, NDRE, MSAVI.
FeatureStack build_feature_stack(const SceneBundle& scene);

// Rounds every value to float, matching what save_stack/load_stack preserve.
void quantize_f32(FeatureStack& stack);

void save_stack(const FeatureStack& stack, const std::string& dir);
FeatureStack load_stack(const std::string& dir);

struct Normalizer {
  std::vector<std::string> channels;
  std::vector<double> mean;
  std::vector<double> stddev;
  static constexpr double kStdFloor = 1e-8;
};

Normalizer fit_normalizer(const FeatureStack& stack, std::span<const std::size_t> pixels);
FeatureStack apply_normalizer(const Normalizer& normalizer, const FeatureStack& stack);
FeatureStack invert_normalizer(const Normalizer& normalizer, const FeatureStack& stack);

} // namespace fieldfuse
