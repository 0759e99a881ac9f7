#include "capplan/calibrate.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "capplan/error.hpp"

using namespace capplan;
using namespace capplan::calibrate;

namespace {

steadystate::LoadProfile generate(int m, double s, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> eps(0.0, noise);
  std::vector<steadystate::SteadyStatePoint> pts;
  for (int i = 1; i <= 120; ++i) {
    const double n = 2.5 * m * i / 120.0;
    const double x = std::min<double>(n, m) / s * (1.0 + eps(gen));
    const double r = (n <= m ? s : n * s / m) * (1.0 + eps(gen));
    pts.push_back({n, x, r, i * 300000LL});
  }
  return steadystate::make_profile(std::move(pts));
}

}  // namespace

TEST(Calibrate, RecoversTomcatModels) {
  for (auto [m, s] : {std::pair{300, 0.4444}, std::pair{254, 0.2236}}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto model = calibrate_model(generate(m, s, 0.01, seed));
      EXPECT_EQ(model.status, ModelStatus::Saturated);
      ASSERT_TRUE(model.threads);
      EXPECT_NEAR(*model.threads, m, 5);
      EXPECT_NEAR(model.service_time, s, 0.02 * s);
    }
  }
}

TEST(Calibrate, SourcesAndUnsaturatedData) {
  const auto profile = generate(50, 0.1, 0.0, 1);
  CalibrationOptions opts;
  opts.source = ServiceTimeSource::Quantile;
  opts.response_quantile = 0.0;
  EXPECT_DOUBLE_EQ(calibrate_model(profile, opts).service_time, 0.1);
  opts.source = ServiceTimeSource::KneeFit;
  EXPECT_NEAR(calibrate_model(profile, opts).service_time, 0.1, 1e-9);

  std::vector<steadystate::SteadyStatePoint> linear;
  for (int i = 1; i <= 10; ++i) linear.push_back({double(i), i / 0.2, 0.2, i});
  const auto model = calibrate_model(steadystate::make_profile(linear));
  EXPECT_EQ(model.status, ModelStatus::Unsaturated);
  EXPECT_FALSE(model.threads);
  EXPECT_TRUE(std::isinf(model.max_throughput));
  EXPECT_DOUBLE_EQ(predict_throughput(model, 1000), 5000.0);
  EXPECT_THROW(calibrate_model(steadystate::make_profile({linear.begin(), linear.begin() + 3})),
               DataError);
}

TEST(Predict, PiecewiseShape) {
  const auto m = CalibratedModel::from_parameters(254, 0.2236);
  EXPECT_NEAR(m.max_throughput, 1135.96, 0.01);
  EXPECT_DOUBLE_EQ(predict_response(m, 10), 0.2236);
  EXPECT_NEAR(predict_response(m, 508), 0.4472, 1e-15);
  EXPECT_NEAR(predict_throughput(m, 1000), m.max_throughput, 1e-9);
}

TEST(Predict, LittleLawClosureOnRandomTuples) {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> md(1, 1000);
  std::uniform_real_distribution<double> sd(1e-4, 5.0), nd(0.0, 3000.0);
  for (int i = 0; i < 2000; ++i) {
    const auto model = CalibratedModel::from_parameters(md(gen), sd(gen));
    const double n = nd(gen);
    const double prod = predict_throughput(model, n) * predict_response(model, n);
    EXPECT_NEAR(prod, n, 1e-12 * std::max(1.0, n));
  }
}

TEST(Residuals, ExactModelHasZeroError) {
  const auto profile = generate(40, 0.3, 0.0, 1);
  const auto rep = residual_report(CalibratedModel::from_parameters(40, 0.3), profile);
  EXPECT_LT(rep.rms_throughput, 1e-12);
  EXPECT_LT(rep.max_response, 1e-12);
  EXPECT_DOUBLE_EQ(rep.within_10pct_throughput, 1.0);
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
}

TEST(ModelFile, RoundTrip) {
  auto model = calibrate_model(generate(254, 0.2236, 0.01, 9));
  model.source = "oct-2018";
  std::ostringstream out;
  write_model(out, model);
  EXPECT_EQ(out.str().rfind("# capplan model", 0), 0u);
  std::istringstream in(out.str());
  const auto back = read_model(in);
  EXPECT_EQ(back.source, "oct-2018");
  EXPECT_EQ(back.service_time, model.service_time);
  EXPECT_EQ(back.threads, model.threads);
  EXPECT_EQ(back.max_throughput, model.max_throughput);
  EXPECT_EQ(back.status, model.status);
}
