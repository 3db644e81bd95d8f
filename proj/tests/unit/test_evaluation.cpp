#include "doctest.h"

#include <numeric>

#include "fieldfuse/evaluation.hpp"
#include "helpers.hpp"

using namespace fieldfuse;

namespace {

EvalReport report_from_cm(const std::vector<std::vector<int>>& cm) {
  std::vector<int> t, p;
  for (std::size_t i = 0; i < cm.size(); ++i)
    for (std::size_t j = 0; j < cm.size(); ++j)
      for (int c = 0; c < cm[i][j]; ++c) {
        t.push_back(static_cast<int>(i));
        p.push_back(static_cast<int>(j));
      }
  return metrics(confusion(t, p, static_cast<int>(cm.size())));
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("perfect predictions give a diagonal matrix") {
  const std::vector<int> y = {0, 1, 2, 2, 1};
  const auto cm = confusion(y, y, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(cm.at(i, j) == 0);
  const auto r = metrics(cm);
  CHECK(r.oa == 100.0);
  CHECK(r.macro_f1 == 1.0);
}

TEST_CASE("confusion errors") {
  const std::vector<int> empty;
  CHECK_THROWS_AS(confusion(empty, empty, 2), Error);
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, 2), Error);
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{2}, 2), Error);
}

TEST_CASE("confusion matches a naive recount") {
  auto rng = make_rng(1, "cm");
  std::vector<int> t(500), p(500);
  for (std::size_t i = 0; i < 500; ++i) {
    t[i] = static_cast<int>(uniform_index(rng, 6));
    p[i] = static_cast<int>(uniform_index(rng, 6));
  }
  const auto cm = confusion(t, p, 6);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < 500; ++i) n += (t[i] == a && p[i] == b);
      CHECK(cm.at(a, b) == n);
    }
  CHECK(cm.total() == 500);
}

TEST_CASE("two-class worked example") {
  const auto r = report_from_cm({{2, 1}, {0, 3}});
  CHECK(r.oa == doctest::Approx(83.3333).epsilon(1e-5));
  CHECK(r.per_class[0].f1 == doctest::Approx(0.8));
  CHECK(r.per_class[1].f1 == doctest::Approx(6.0 / 7.0));
  CHECK(r.macro_f1 == doctest::Approx(0.8285714).epsilon(1e-6));
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("class absent from ground truth is excluded from macro F1") {
  const auto r = report_from_cm({{3, 0, 1}, {0, 4, 0}, {0, 0, 0}});
  CHECK(r.per_class[2].support == 0);
  const double f0 = 2 * 1.0 * 0.75 / 1.75;
  CHECK(r.macro_f1 == doctest::Approx((f0 + 1.0) / 2));
}

TEST_CASE("metrics are invariant under class relabeling") {
  auto rng = make_rng(2, "perm");
  std::vector<int> t(300), p(300);
  for (std::size_t i = 0; i < 300; ++i) {
    t[i] = static_cast<int>(uniform_index(rng, 4));
    p[i] = uniform_unit(rng) < 0.6 ? t[i] : static_cast<int>(uniform_index(rng, 4));
  }
  const auto base = metrics(confusion(t, p, 4));
  const std::vector<int> perm = {2, 0, 3, 1};
  std::vector<int> tp(300), pp(300);
  for (std::size_t i = 0; i < 300; ++i) {
    tp[i] = perm[static_cast<std::size_t>(t[i])];
    pp[i] = perm[static_cast<std::size_t>(p[i])];
  }
  const auto r = metrics(confusion(tp, pp, 4));
  CHECK(r.oa == doctest::Approx(base.oa).epsilon(1e-12));
  CHECK(r.macro_f1 == doctest::Approx(base.macro_f1).epsilon(1e-12));
}

TEST_CASE("report json round-trip") {
  auto r = report_from_cm({{5, 1}, {2, 7}});
  r.classifier = "gb";
  r.balancing = "ros";
  r.strategy = "bayesian";
  r.class_catalog = {"Maize", "Pecan"};
  const auto back = report_from_json(report_to_json(r));
  CHECK(back.cm.counts == r.cm.counts);
  CHECK(back.oa == r.oa);
  CHECK(back.macro_f1 == r.macro_f1);
  CHECK(back.strategy == "bayesian");
  CHECK(back.class_catalog == r.class_catalog);
  CHECK(report_to_text(r).find("Maize") != std::string::npos);
  CHECK(report_to_csv(r).find("Pecan") != std::string::npos);
}

TEST_CASE("comparison formats reference GB/ROS cells and delta") {
  const std::vector<ComparisonEntry> e = {{"gb", "ros", "pixel", 68.5, 0.51},
                                          {"gb", "ros", "bayesian", 77.44, 0.66},
                                          {"gb", "ros", "average", 77.25, 0.0},
                                          {"gb", "ros", "majority", 76.67, 0.0}};
  const auto t = compare_strategies(e);
  CHECK(t.text.find("68.50") != std::string::npos);
  CHECK(t.text.find("77.44") != std::string::npos);
  CHECK(t.text.find("+0.77") != std::string::npos);
  CHECK(t.text.find("+0.19") != std::string::npos);
  CHECK(t.csv.find("gb,ros,bayesian,77.44,0.660") != std::string::npos);
}

TEST_CASE("single report gives one row and no deltas") {
  const auto t = compare_strategies({{"rf", "smote", "bayesian", 73.2, 0.47}});
  CHECK(t.text.find("gain") == std::string::npos);
  CHECK(t.csv == "classifier,balancing,strategy,oa,macro_f1\nrf,smote,bayesian,73.20,0.470\n");
}

}
