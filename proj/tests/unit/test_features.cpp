#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fieldfuse/features.hpp"
#include "fieldfuse/synthgen.hpp"
#include "helpers.hpp"

using namespace fieldfuse;

namespace {

BandRaster band(const std::string& name, int w, int h, int res, std::vector<std::uint16_t> v) {
  BandRaster b;
  b.name = name;
  b.width = w;
  b.height = h;
  b.resolution_m = res;
  b.values = std::move(v);
  return b;
}

// Textbook bilinear interpolation of `b` at continuous source coordinates
// (sy, sx), with coordinates clamped into the grid.
double bilinear_oracle(const BandRaster& b, double sy, double sx) {
  sy = std::min(std::max(sy, 0.0), double(b.height - 1));
  sx = std::min(std::max(sx, 0.0), double(b.width - 1));
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, b.height - 1), x1 = std::min(x0 + 1, b.width - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * b.at(y0, x0) + fx * b.at(y0, x1)) + fy * ((1 - fx) * b.at(y1, x0) + fx * b.at(y1, x1));
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("native resolutions") {
  CHECK(native_resolution("B02") == 10);
  CHECK(native_resolution("B8A") == 20);
  CHECK(native_resolution("B10") == 60);
}

TEST_CASE("constant band stays constant") {
  const auto out = upsample_bilinear(band("B05", 3, 2, 20, std::vector<std::uint16_t>(6, 7)));
  CHECK(out.width == 6);
  CHECK(out.height == 4);
  for (double v : out.values) CHECK(v == 7.0);
}

TEST_CASE("factor one is the identity") {
  const auto b = band("B02", 3, 2, 10, {1, 2, 3, 40, 50, 60});
  const auto out = upsample_bilinear(b);
  REQUIRE(out.values.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(out.values[i] == b.values[i]);
}

TEST_CASE("2x2 ramp matches the bilinear formula at mapped centers") {
  const auto b = band("B05", 2, 2, 20, {0, 2, 4, 6});
  const auto out = upsample_bilinear(b);
  REQUIRE(out.width == 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(out.at(r, c) == doctest::Approx(bilinear_oracle(b, (r + 0.5) / 2 - 0.5, (c + 0.5) / 2 - 0.5)).epsilon(1e-15));
  // Spot values: source coordinates are {0, 0.25, 0.75, 1} per axis.
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(1, 2) == doctest::Approx(4 * 0.25 + 2 * 0.75));
  CHECK(out.at(3, 3) == 6.0);
}

TEST_CASE("random 60 m band stays within source bounds and matches the oracle") {
  auto rng = make_rng(5, "bands");
  std::vector<std::uint16_t> v(35);
  for (auto& x : v) x = static_cast<std::uint16_t>(uniform_index(rng, 10000));
  const auto b = band("B01", 7, 5, 60, v);
  const auto out = upsample_bilinear(b);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      CHECK(out.at(r, c) >= *lo);
      CHECK(out.at(r, c) <= *hi);
      CHECK(out.at(r, c) == doctest::Approx(bilinear_oracle(b, (r + 0.5) / 6 - 0.5, (c + 0.5) / 6 - 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("indices") {
  CHECK(compute_indices(0.1, 0.2, 0.3, 0.8).ndvi == doctest::Approx(0.6));
  CHECK(compute_indices(0.1, 0.2, 0.5, 0.5).ndre == 0.0);
  const auto z = compute_indices(0.0, 0.0, 0.0, 0.0);
  CHECK(z.ndvi == 0.0);
  CHECK(z.ndre == 0.0);
  const auto e = compute_indices(0.05, 0.1, 0.2, 0.4);
  CHECK(e.evi == doctest::Approx(2.5 * 0.3 / (0.4 + 0.6 - 0.375 + 1)));
  const double two = 2 * 0.4 + 1;
  CHECK(e.msavi == doctest::Approx((two - std::sqrt(two * two - 8 * 0.3)) / 2));
}

TEST_CASE("ndvi and ndre stay within [-1, 1]") {
  auto rng = make_rng(6, "idx");
  for (int i = 0; i < 10000; ++i) {
    const auto v = compute_indices(uniform_unit(rng), uniform_unit(rng), uniform_unit(rng), uniform_unit(rng));
    CHECK(std::abs(v.ndvi) <= 1.0);
    CHECK(std::abs(v.ndre) <= 1.0);
    CHECK(std::isfinite(v.evi));
    CHECK(std::isfinite(v.msavi));
  }
}

TEST_CASE("feature stack channel order and determinism") {
  SynthSpec spec;
  spec.n_fields = 10;
  spec.grid_width = 60;
  spec.grid_height = 60;
  spec.min_field_pixels = 20;
  spec.max_field_pixels = 40;
  spec.native_resolutions = true;
  const auto s = generate(spec);
  const auto a = build_feature_stack(s.scene);
  const auto b = build_feature_stack(s.scene);
  REQUIRE(a.channels.size() == 17);
  CHECK(a.channels[0] == "B01");
  CHECK(a.channels[8] == "B8A");
  CHECK(a.channels[12] == "B12");
  CHECK(a.channels[13] == "NDVI");
  CHECK(a.channels[16] == "MSAVI");
  CHECK(a.values == b.values);
  // NDVI channel agrees with the index formula on the upsampled bands.
  const std::size_t p = 1234;
  const double red = a.values[3][p] / 10000, nir = a.values[7][p] / 10000;
  CHECK(a.values[13][p] == doctest::Approx((nir - red) / (nir + red)));
}

TEST_CASE("stack round-trips through f32 files after quantization") {
  testutil::TempDir dir("stack");
  SynthSpec spec;
  spec.n_fields = 5;
  spec.grid_width = 30;
  spec.grid_height = 30;
  spec.min_field_pixels = 10;
  spec.max_field_pixels = 20;
  auto stack = build_feature_stack(generate(spec).scene);
  quantize_f32(stack);
  save_stack(stack, dir / "s");
  const auto back = load_stack(dir / "s");
  CHECK(back.channels == stack.channels);
  CHECK(back.values == stack.values);
  CHECK(back.geo == stack.geo);
}

TEST_CASE("normalizer moments") {
  FeatureStack s;
  s.width = 2;
  s.height = 1;
  s.channels = {"a", "b"};
  s.values = {{1.0, 3.0}, {5.0, 5.0}};
  const std::vector<std::size_t> px = {0, 1};
  const auto n = fit_normalizer(s, px);
  CHECK(n.mean[0] == 2.0);
  CHECK(n.stddev[0] == 1.0);
  CHECK(n.stddev[1] == Normalizer::kStdFloor);
  const auto z = apply_normalizer(n, s);
  CHECK(z.values[1][0] == 0.0);
  CHECK(z.values[0][0] == -1.0);

  std::vector<std::size_t> empty;
  CHECK_THROWS_AS(fit_normalizer(s, empty), Error);
}

TEST_CASE("normalized training pixels have zero mean and unit variance; inverse recovers inputs") {
  auto rng = make_rng(8, "norm");
  FeatureStack s;
  s.width = 400;
  s.height = 1;
  s.channels = {"a", "b", "c"};
  s.values.assign(3, std::vector<double>(400));
  for (auto& ch : s.values)
    for (auto& v : ch) v = 1000 * uniform_unit(rng) + 50 * standard_normal(rng);
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < 400; i += 2) train.push_back(i);
  const auto n = fit_normalizer(s, train);
  const auto z = apply_normalizer(n, s);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (auto i : train) m += z.values[c][i];
    m /= train.size();
    for (auto i : train) v += (z.values[c][i] - m) * (z.values[c][i] - m);
    v /= train.size();
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
  const auto back = invert_normalizer(n, z);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 400; ++i) CHECK(std::abs(back.values[c][i] - s.values[c][i]) < 1e-9);

  Normalizer identity{s.channels, {0, 0, 0}, {1, 1, 1}};
  CHECK(apply_normalizer(identity, s).values == s.values);

  Normalizer wrong{{"x"}, {0}, {1}};
  CHECK_THROWS_AS(apply_normalizer(wrong, s), Error);
}

}
