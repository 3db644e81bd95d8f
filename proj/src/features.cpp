#include "fieldfuse/features.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstring>

#include "json.hpp"

namespace fieldfuse {

namespace fs = std::filesystem;
using json = nlohmann::json;

int native_resolution(std::string_view band_name) {
  if (band_name == "B02" || band_name == "B03" || band_name == "B04" || band_name == "B08")
    return 10;
  if (band_name == "B01" || band_name == "B09" || band_name == "B10") return 60;
  return 20;
}

RealGrid upsample_bilinear(const BandRaster& band, int target_resolution_m) {
  if (target_resolution_m <= 0 || band.resolution_m % target_resolution_m != 0)
    throw Error("upsample: resolution " + std::to_string(band.resolution_m) +
                " m is not a multiple of " + std::to_string(target_resolution_m) + " m");
  const int factor = band.resolution_m / target_resolution_m;
  RealGrid out;
  out.width = band.width * factor;
  out.height = band.height * factor;
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);

  const double inv = 1.0 / factor;
  const int max_col = band.width - 1;
  const int max_row = band.height - 1;
#pragma omp parallel for schedule(static)
  for (int row = 0; row < out.height; ++row) {
    const double sy = std::clamp((row + 0.5) * inv - 0.5, 0.0, double(max_row));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, max_row);
    const double ty = sy - y0;
    double* dst = out.values.data() + static_cast<std::size_t>(row) * out.width;
    for (int col = 0; col < out.width; ++col) {
      const double sx = std::clamp((col + 0.5) * inv - 0.5, 0.0, double(max_col));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, max_col);
      const double tx = sx - x0;
      const double top = std::lerp(double(band.at(y0, x0)), double(band.at(y0, x1)), tx);
      const double bottom = std::lerp(double(band.at(y1, x0)), double(band.at(y1, x1)), tx);
      dst[col] = std::lerp(top, bottom, ty);
    }
  }
  return out;
}

IndexValues compute_indices(double blue, double red, double red_edge, double nir) {
  IndexValues v;
  const double ndvi_den = nir + red;
  if (ndvi_den > 0.0) v.ndvi = (nir - red) / ndvi_den;
  const double evi_den = nir + 6.0 * red - 7.5 * blue + 1.0;
  if (evi_den > 0.0) v.evi = 2.5 * (nir - red) / evi_den;
  const double ndre_den = nir + red_edge;
  if (ndre_den > 0.0) v.ndre = (nir - red_edge) / ndre_den;
  const double a = 2.0 * nir + 1.0;
  const double radicand = a * a - 8.0 * (nir - red);
  if (radicand >= 0.0) v.msavi = (a - std::sqrt(radicand)) / 2.0;
  return v;
}

FeatureStack build_feature_stack(const SceneBundle& scene) {
  validate_scene(scene);
  FeatureStack stack;
  stack.width = scene.target_width();
  stack.height = scene.target_height();
  stack.geo = scene.geo;
  stack.geo.pixel_size_m = 10.0;
  for (const auto& name : kBandNames) {
    auto grid = upsample_bilinear(scene.band(name), 10);
    if (grid.width != stack.width || grid.height != stack.height)
      throw Error("band " + name + " does not upsample onto the 10 m grid");
    stack.channels.push_back(name);
    stack.values.push_back(std::move(grid.values));
  }
  const auto n = stack.pixel_count();
  const auto& blue = stack.values[1];
  const auto& red = stack.values[3];
  const auto& red_edge = stack.values[4];
  const auto& nir = stack.values[7];
  std::vector<double> ndvi(n), evi(n), ndre(n), msavi(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto v = compute_indices(blue[i] / 10000.0, red[i] / 10000.0,
                                   red_edge[i] / 10000.0, nir[i] / 10000.0);
    ndvi[i] = v.ndvi;
    evi[i] = v.evi;
    ndre[i] = v.ndre;
    msavi[i] = v.msavi;
  }
  for (const auto& name : kIndexNames) stack.channels.push_back(name);
  stack.values.push_back(std::move(ndvi));
  stack.values.push_back(std::move(evi));
  stack.values.push_back(std::move(ndre));
  stack.values.push_back(std::move(msavi));
  return stack;
}

void quantize_f32(FeatureStack& stack) {
  for (auto& ch : stack.values)
    for (auto& v : ch) v = static_cast<double>(static_cast<float>(v));
}

void save_stack(const FeatureStack& stack, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  json header;
  header["width"] = stack.width;
  header["height"] = stack.height;
  header["geo_transform"] = {{"x0", stack.geo.x0},
                             {"y0", stack.geo.y0},
                             {"pixel_size_m", stack.geo.pixel_size_m}};
  header["channels"] = json::array();
  for (std::size_t c = 0; c < stack.channels.size(); ++c) {
    const std::string file = stack.channels[c] + ".f32";
    header["channels"].push_back({{"name", stack.channels[c]},
                                  {"width", stack.width},
                                  {"height", stack.height},
                                  {"resolution_m", 10},
                                  {"file", file},
                                  {"dtype", "f32"}});
    const auto& vals = stack.values[c];
    std::vector<char> bytes(vals.size() * 4);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const float f = static_cast<float>(vals[i]);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>(bits >> (8 * b));
    }
    std::ofstream out(root / file, std::ios::binary);
    if (!out) throw Error("cannot write channel " + stack.channels[c]);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  write_text_file((root / "stack.json").string(), header.dump(2) + "\n");
}

FeatureStack load_stack(const std::string& dir) {
  const fs::path root(dir);
  FeatureStack stack;
  try {
    const json header = json::parse(read_text_file((root / "stack.json").string()));
    stack.width = header.at("width").get<int>();
    stack.height = header.at("height").get<int>();
    const auto& geo = header.at("geo_transform");
    stack.geo = {geo.at("x0").get<double>(), geo.at("y0").get<double>(),
                 geo.at("pixel_size_m").get<double>()};
    const std::size_t n = stack.pixel_count();
    for (const auto& ch : header.at("channels")) {
      if (ch.at("dtype").get<std::string>() != "f32")
        throw Error("feature stack: unsupported dtype");
      const auto name = ch.at("name").get<std::string>();
      std::ifstream in(root / ch.at("file").get<std::string>(), std::ios::binary);
      if (!in) throw Error("feature stack: missing channel file for " + name);
      std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
      if (bytes.size() != n * 4)
        throw Error("feature stack: header/binary length mismatch for " + name);
      std::vector<double> vals(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= std::uint32_t(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        float f;
        std::memcpy(&f, &bits, 4);
        vals[i] = f;
      }
      stack.channels.push_back(name);
      stack.values.push_back(std::move(vals));
    }
  } catch (const json::exception& e) {
    throw Error("malformed stack.json: " + std::string(e.what()));
  }
  return stack;
}

Normalizer fit_normalizer(const FeatureStack& stack, std::span<const std::size_t> pixels) {
  if (pixels.empty()) throw Error("fit_normalizer: empty pixel set");
  const int nc = stack.channel_count();
  Normalizer norm;
  norm.channels = stack.channels;
  norm.mean.assign(nc, 0.0);
  norm.stddev.assign(nc, 0.0);
  const double count = static_cast<double>(pixels.size());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c) {
    const auto& vals = stack.values[c];
    double sum = 0.0;
    for (auto p : pixels) sum += vals[p];
    const double mean = sum / count;
    double ss = 0.0;
    for (auto p : pixels) {
      const double d = vals[p] - mean;
      ss += d * d;
    }
    norm.mean[c] = mean;
    norm.stddev[c] = std::max(std::sqrt(ss / count), Normalizer::kStdFloor);
  }
  return norm;
}

namespace {
void check_channels(const Normalizer& normalizer, const FeatureStack& stack) {
  if (normalizer.channels != stack.channels)
    throw Error("normalizer: channel mismatch between normalizer and feature stack");
}
} // namespace

FeatureStack apply_normalizer(const Normalizer& normalizer, const FeatureStack& stack) {
  check_channels(normalizer, stack);
  FeatureStack out = stack;
  const int nc = stack.channel_count();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c)
    for (auto& v : out.values[c]) v = (v - normalizer.mean[c]) / normalizer.stddev[c];
  return out;
}

FeatureStack invert_normalizer(const Normalizer& normalizer, const FeatureStack& stack) {
  check_channels(normalizer, stack);
  FeatureStack out = stack;
  const int nc = stack.channel_count();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c)
    for (auto& v : out.values[c]) v = v * normalizer.stddev[c] + normalizer.mean[c];
  return out;
}

} // namespace fieldfuse
