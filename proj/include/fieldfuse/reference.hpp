#pragma once

// Single-threaded reference versions of the OpenMP kernels. They perform the
// same arithmetic in a plain loop, so the parallel kernels must match them
// bit for bit at any thread count.

#include <span>
#include <vector>

#include "fieldfuse/aggregation.hpp"
#include "fieldfuse/features.hpp"
#include "fieldfuse/forest.hpp"
#include "fieldfuse/gbm.hpp"
#include "fieldfuse/ingest.hpp"
#include "fieldfuse/knn.hpp"

namespace fieldfuse::reference {

RealGrid upsample_bilinear(const BandRaster& band, int target_resolution_m = 10);

// Visits every pixel center and tests every field in listing order.
LabelRaster rasterize_fields(const FieldSet& fields, const GridSpec& grid);

std::vector<double> knn_predict_batch(const KnnModel& model, std::span<const double> queries);
std::vector<double> rf_predict_batch(const ForestModel& model, std::span<const double> queries);
std::vector<double> gb_predict_batch(const GbmModel& model, std::span<const double> queries);

std::vector<FieldPrediction> aggregate_table(const ProbabilityTable& table, Strategy strategy,
                                             double alpha = 0.35);

} // namespace fieldfuse::reference
