#include "fieldfuse/reference.hpp"

#include <algorithm>
#include <cmath>

namespace fieldfuse::reference {

RealGrid upsample_bilinear(const BandRaster& band, int target_resolution_m) {
  if (target_resolution_m <= 0 || band.resolution_m % target_resolution_m != 0)
    throw Error("upsample: incompatible resolutions");
  const int factor = band.resolution_m / target_resolution_m;
  RealGrid out;
  out.width = band.width * factor;
  out.height = band.height * factor;
  out.values.reserve(static_cast<std::size_t>(out.width) * out.height);
  const double inv = 1.0 / factor;
  for (int row = 0; row < out.height; ++row) {
    const double sy = std::clamp((row + 0.5) * inv - 0.5, 0.0, double(band.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, band.height - 1);
    for (int col = 0; col < out.width; ++col) {
      const double sx = std::clamp((col + 0.5) * inv - 0.5, 0.0, double(band.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, band.width - 1);
      const double top = std::lerp(double(band.at(y0, x0)), double(band.at(y0, x1)), sx - x0);
      const double bottom = std::lerp(double(band.at(y1, x0)), double(band.at(y1, x1)), sx - x0);
      out.values.push_back(std::lerp(top, bottom, sy - y0));
    }
  }
  return out;
}

LabelRaster rasterize_fields(const FieldSet& fields, const GridSpec& grid) {
  LabelRaster lr;
  lr.width = grid.width;
  lr.height = grid.height;
  lr.geo = grid.geo;
  lr.class_catalog = fields.class_catalog;
  for (const auto& f : fields.fields) {
    lr.field_ids.push_back(f.field_id);
    lr.field_classes.push_back(fields.class_index(f.crop_label));
  }
  lr.field_index.assign(static_cast<std::size_t>(grid.width) * grid.height, -1);
  for (int row = 0; row < grid.height; ++row)
    for (int col = 0; col < grid.width; ++col) {
      const Point p{grid.geo.x0 + (col + 0.5) * grid.geo.pixel_size_m,
                    grid.geo.y0 - (row + 0.5) * grid.geo.pixel_size_m};
      for (std::size_t f = 0; f < fields.fields.size(); ++f)
        if (point_in_rings(fields.fields[f].rings, p)) {
          lr.field_index[static_cast<std::size_t>(row) * grid.width + col] = static_cast<std::int32_t>(f);
          break;
        }
    }
  return lr;
}

namespace {
template <class Model, class Fn>
std::vector<double> batch(const Model& model, std::span<const double> queries, Fn fn) {
  const std::size_t n = queries.size() / static_cast<std::size_t>(model.dim);
  std::vector<double> out(n * static_cast<std::size_t>(model.n_classes));
  for (std::size_t q = 0; q < n; ++q)
    fn(model, queries.data() + q * model.dim, out.data() + q * model.n_classes);
  return out;
}
} // namespace

std::vector<double> knn_predict_batch(const KnnModel& model, std::span<const double> queries) {
  return batch(model, queries, detail::knn_predict_into);
}

std::vector<double> rf_predict_batch(const ForestModel& model, std::span<const double> queries) {
  return batch(model, queries, detail::rf_predict_into);
}

std::vector<double> gb_predict_batch(const GbmModel& model, std::span<const double> queries) {
  return batch(model, queries, detail::gb_predict_into);
}

std::vector<FieldPrediction> aggregate_table(const ProbabilityTable& table, Strategy strategy, double alpha) {
  std::vector<FieldPrediction> out;
  for (const auto& [id, rows] : group_by_field(table)) {
    std::vector<double> block;
    for (auto r : rows) {
      const auto p = table.row(r);
      block.insert(block.end(), p.begin(), p.end());
    }
    auto pred = aggregate(block, table.n_classes, strategy, alpha);
    pred.field_id = id;
    out.push_back(std::move(pred));
  }
  return out;
}

} // namespace fieldfuse::reference
