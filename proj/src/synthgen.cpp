#include "fieldfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fieldfuse/features.hpp"

namespace fieldfuse {

std::vector<std::string> synthetic_class_names(int n_classes) {
  static const std::vector<std::string> base = {"Cotton", "Grass",  "Lucern",  "Maize",
                                                "Pecan",  "Vacant", "Vineyard"};
  std::vector<std::string> out;
  for (int c = 0; c < n_classes; ++c) {
    if (c < static_cast<int>(base.size())) {
      out.push_back(base[static_cast<std::size_t>(c)]);
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "Crop%02d", c);
      out.push_back(buf);
    }
  }
  return out;
}

namespace {

struct Rect {
  int row, col, height, width;
};

void check_spec(const SynthSpec& s) {
  if (s.n_classes < 2) throw Error("synth: n_classes must be >= 2");
  if (s.n_fields < 1) throw Error("synth: n_fields must be >= 1");
  if (s.min_field_pixels < 1 || s.max_field_pixels < s.min_field_pixels)
    throw Error("synth: invalid field pixel range");
  if (s.grid_width < 1 || s.grid_height < 1) throw Error("synth: empty grid");
  if (s.sigma < 0.0 || s.field_sigma < 0.0) throw Error("synth: negative noise");
  if (s.native_resolutions && (s.grid_width % 6 != 0 || s.grid_height % 6 != 0))
    throw Error("synth: native resolutions need grid dimensions divisible by 6");
  if (s.class_means && static_cast<int>(s.class_means->size()) != s.n_classes)
    throw Error("synth: class_means must have one entry per class");
}

// Rectangle dimensions whose area lies in [lo, hi].
std::pair<int, int> draw_shape(Rng& rng, const SynthSpec& s) {
  for (;;) {
    const int target = s.min_field_pixels +
                       static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(s.max_field_pixels - s.min_field_pixels + 1)));
    const double aspect = 0.5 + 1.5 * uniform_unit(rng);
    const int w = std::max(1, static_cast<int>(std::lround(std::sqrt(target * aspect))));
    int h = std::max(1, static_cast<int>(std::lround(double(target) / w)));
    while (w * h < s.min_field_pixels) ++h;
    while (w * h > s.max_field_pixels && h > 1) --h;
    if (w * h >= s.min_field_pixels && w * h <= s.max_field_pixels && w <= s.grid_width && h <= s.grid_height)
      return {h, w};
  }
}

BandRaster downsample(const BandRaster& fine, int resolution) {
  const int f = resolution / 10;
  BandRaster out;
  out.name = fine.name;
  out.resolution_m = resolution;
  out.width = fine.width / f;
  out.height = fine.height / f;
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      double sum = 0.0;
      for (int dr = 0; dr < f; ++dr)
        for (int dc = 0; dc < f; ++dc) sum += fine.at(r * f + dr, c * f + dc);
      out.values[static_cast<std::size_t>(r) * out.width + c] =
          static_cast<std::uint16_t>(std::lround(sum / (f * f)));
    }
  return out;
}

std::uint16_t quantize(double v) {
  return static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
}

} // namespace

SynthScene generate(const SynthSpec& spec) {
  check_spec(spec);
  SynthScene out;
  const auto names = synthetic_class_names(spec.n_classes);

  if (spec.class_means) {
    out.class_means = *spec.class_means;
  } else {
    auto rng = make_rng(spec.seed, "synth_means");
    for (int c = 0; c < spec.n_classes; ++c) {
      BandMeans m{};
      for (auto& v : m) v = std::round(spec.mean_low + (spec.mean_high - spec.mean_low) * uniform_unit(rng));
      out.class_means.push_back(m);
    }
  }

  // Field placement on an occupancy grid.
  auto place_rng = make_rng(spec.seed, "synth_place");
  std::vector<char> occupied(static_cast<std::size_t>(spec.grid_width) * spec.grid_height, 0);
  std::vector<Rect> rects;
  for (int i = 0; i < spec.n_fields; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      const auto [h, w] = draw_shape(place_rng, spec);
      const int row = static_cast<int>(uniform_index(place_rng, static_cast<std::uint64_t>(spec.grid_height - h + 1)));
      const int col = static_cast<int>(uniform_index(place_rng, static_cast<std::uint64_t>(spec.grid_width - w + 1)));
      bool free = true;
      for (int r = row; r < row + h && free; ++r)
        for (int c = col; c < col + w; ++c)
          if (occupied[static_cast<std::size_t>(r) * spec.grid_width + c]) {
            free = false;
            break;
          }
      if (!free) continue;
      for (int r = row; r < row + h; ++r)
        for (int c = col; c < col + w; ++c) occupied[static_cast<std::size_t>(r) * spec.grid_width + c] = 1;
      rects.push_back({row, col, h, w});
      placed = true;
    }
    if (!placed)
      throw Error("synth: could not place all fields; placed " + std::to_string(rects.size()) + " of " +
                  std::to_string(spec.n_fields));
  }

  // Classes: round-robin for the first three per class, weighted draws after.
  auto class_rng = make_rng(spec.seed, "synth_classes");
  std::vector<double> cw;
  for (int c = 0; c < spec.n_classes; ++c) cw.push_back(std::exp(-spec.class_imbalance * c));
  const double cw_total = [&] { double t = 0; for (double v : cw) t += v; return t; }();
  std::vector<int> field_class;
  for (int i = 0; i < spec.n_fields; ++i) {
    if (i < 3 * spec.n_classes) {
      field_class.push_back(i % spec.n_classes);
      continue;
    }
    double u = uniform_unit(class_rng) * cw_total;
    int c = 0;
    while (c + 1 < spec.n_classes && u >= cw[static_cast<std::size_t>(c)]) {
      u -= cw[static_cast<std::size_t>(c)];
      ++c;
    }
    field_class.push_back(c);
  }

  // Band values at 10 m.
  const GeoTransform geo{500000.0, 7000000.0, 10.0};
  std::vector<std::int32_t> owner(occupied.size(), -1);
  for (std::size_t f = 0; f < rects.size(); ++f)
    for (int r = rects[f].row; r < rects[f].row + rects[f].height; ++r)
      for (int c = rects[f].col; c < rects[f].col + rects[f].width; ++c)
        owner[static_cast<std::size_t>(r) * spec.grid_width + c] = static_cast<std::int32_t>(f);

  auto offset_rng = make_rng(spec.seed, "synth_field_offsets");
  std::vector<BandMeans> offsets(rects.size());
  for (auto& o : offsets)
    for (auto& v : o) v = spec.field_sigma * standard_normal(offset_rng);

  BandMeans background{};
  for (const auto& m : out.class_means)
    for (int b = 0; b < kBandCount; ++b) background[static_cast<std::size_t>(b)] += m[static_cast<std::size_t>(b)] / spec.n_classes;

  out.scene.scene_id = "synth-" + std::to_string(spec.seed);
  out.scene.geo = geo;
  for (int b = 0; b < kBandCount; ++b) {
    auto noise_rng = make_rng(spec.seed, "synth_noise", static_cast<std::uint64_t>(b));
    BandRaster band;
    band.name = kBandNames[static_cast<std::size_t>(b)];
    band.width = spec.grid_width;
    band.height = spec.grid_height;
    band.resolution_m = 10;
    band.values.resize(occupied.size());
    for (std::size_t p = 0; p < occupied.size(); ++p) {
      const auto f = owner[p];
      double mean = background[static_cast<std::size_t>(b)];
      if (f >= 0)
        mean = out.class_means[static_cast<std::size_t>(field_class[static_cast<std::size_t>(f)])][static_cast<std::size_t>(b)] +
               offsets[static_cast<std::size_t>(f)][static_cast<std::size_t>(b)];
      const double noise = spec.sigma > 0.0 ? spec.sigma * standard_normal(noise_rng) : 0.0;
      band.values[p] = quantize(mean + noise);
    }
    if (spec.native_resolutions && native_resolution(band.name) != 10)
      band = downsample(band, native_resolution(band.name));
    out.scene.bands.push_back(std::move(band));
  }

  for (std::size_t f = 0; f < rects.size(); ++f) {
    const auto& r = rects[f];
    FieldPolygon poly;
    char id[24];
    std::snprintf(id, sizeof(id), "F%04zu", f + 1);
    poly.field_id = id;
    poly.crop_label = names[static_cast<std::size_t>(field_class[f])];
    const double xa = geo.x0 + r.col * geo.pixel_size_m;
    const double xb = geo.x0 + (r.col + r.width) * geo.pixel_size_m;
    const double ya = geo.y0 - r.row * geo.pixel_size_m;
    const double yb = geo.y0 - (r.row + r.height) * geo.pixel_size_m;
    poly.rings.push_back({{xa, yb}, {xb, yb}, {xb, ya}, {xa, ya}, {xa, yb}});
    poly.area_ha = (xb - xa) * (ya - yb) / 10000.0;
    out.fields.fields.push_back(std::move(poly));
    out.field_pixels.push_back(r.width * r.height);
  }
  out.fields.class_catalog = build_catalog(out.fields.fields);
  return out;
}

} // namespace fieldfuse
