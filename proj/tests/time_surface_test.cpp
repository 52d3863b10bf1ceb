#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "esvo/error.hpp"
#include "esvo/time_surface.hpp"

namespace esvo {
namespace {

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an esvo::Error";
  return ErrorCode::kInvalidArgument;
}

TimeSurface grid(int w, int h, auto value) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) v[static_cast<std::size_t>(y) * w + x] = value(x, y);
  return TimeSurface(w, h, 0.0, 0.03, std::move(v));
}

TEST(LastEventMap, EmptyBatchLeavesMapUnchanged) {
  LastEventMap m(4, 3);
  m.ingest({});
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_FALSE(m.fired(x, y));
}

TEST(LastEventMap, KeepsLatestTimestamp) {
  LastEventMap m(4, 3);
  const std::vector<Event> events{{1.0, 2, 1, 1}, {2.0, 2, 1, -1}};
  m.ingest(events);
  EXPECT_DOUBLE_EQ(m.last(2, 1), 2.0);
}

TEST(LastEventMap, PixelOutOfRange) {
  LastEventMap m(4, 3);
  const std::vector<Event> events{{1.0, 4, 0, 1}};
  EXPECT_EQ(error_code_of([&] { m.ingest(events); }), ErrorCode::kPixelOutOfRange);
}

TEST(LastEventMap, TimeRegressionRejectedAndMapUnchanged) {
  LastEventMap m(4, 3);
  m.ingest(std::vector<Event>{{1.0, 0, 0, 1}});
  const std::vector<Event> late{{1.5, 1, 1, 1}, {0.9, 2, 2, 1}};
  EXPECT_EQ(error_code_of([&] { m.ingest(late); }), ErrorCode::kNonMonotonicStream);
  EXPECT_FALSE(m.fired(1, 1));
  // Regressions within 1 us are tolerated.
  EXPECT_NO_THROW(m.ingest(std::vector<Event>{{1.0 - 5e-7, 3, 0, 1}}));
}

TEST(Render, DecayValues) {
  LastEventMap m(3, 1);
  m.ingest(std::vector<Event>{{0.97, 0, 0, 1}, {1.0, 1, 0, 1}});
  const TimeSurface ts = render(m, 1.0, 0.03);
  EXPECT_DOUBLE_EQ(ts.at(1, 0), 255.0);
  EXPECT_NEAR(ts.at(0, 0), 255.0 * std::exp(-1.0), 1e-9);
  EXPECT_DOUBLE_EQ(ts.at(2, 0), 0.0);
}

TEST(Render, InvalidDecay) {
  LastEventMap m(3, 1);
  EXPECT_EQ(error_code_of([&] { render(m, 1.0, 0.0); }), ErrorCode::kInvalidDecay);
}

TEST(Negative, Examples) {
  const TimeSurface ts = grid(3, 1, [](int x, int) { return x == 0 ? 255.0 : x == 1 ? 0.0 : 100.0; });
  const TimeSurface n = negative(ts);
  EXPECT_DOUBLE_EQ(n.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(n.at(1, 0), 255.0);
  EXPECT_DOUBLE_EQ(n.at(2, 0), 155.0);
}

TEST(Negative, IsAnInvolution) {
  const TimeSurface ts = grid(5, 4, [](int x, int y) { return std::fmod(37.3 * x + 11.9 * y, 255.0); });
  EXPECT_TRUE(negative(negative(ts)) == ts);
}

TEST(Blur, KernelOneIsIdentity) {
  const TimeSurface ts = grid(6, 5, [](int x, int y) { return 10.0 * x + y; });
  EXPECT_EQ(blur(ts, 1).values(), ts.values());
}

TEST(Blur, ConstantGridUnchanged) {
  const TimeSurface b = blur(grid(9, 7, [](int, int) { return 42.0; }), 5);
  for (double v : b.values()) EXPECT_NEAR(v, 42.0, 1e-12);
}

TEST(Blur, ImpulseMatchesDirectConvolution) {
  const TimeSurface ts = grid(11, 11, [](int x, int y) { return x == 5 && y == 5 ? 255.0 : 0.0; });
  const TimeSurface b = blur(ts, 5);

  // Direct 5x5 convolution with sigma = 5/6.
  const double sigma = 5.0 / 6.0;
  double kernel[5][5], sum = 0.0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) sum += kernel[i + 2][j + 2] = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) EXPECT_NEAR(b.at(5 + j, 5 + i), 255.0 * kernel[i + 2][j + 2] / sum, 1e-9);
  EXPECT_NEAR(b.at(5, 5), 255.0 / sum, 1e-9);
  EXPECT_DOUBLE_EQ(b.at(2, 5), 0.0);
}

TEST(Blur, EvenKernelRejected) {
  const TimeSurface ts = grid(4, 4, [](int, int) { return 0.0; });
  EXPECT_EQ(error_code_of([&] { blur(ts, 4); }), ErrorCode::kInvalidArgument);
}

TEST(Sample, IntegerAndMidpoint) {
  const TimeSurface ts = grid(2, 2, [](int x, int) { return x == 0 ? 0.0 : 255.0; });
  EXPECT_DOUBLE_EQ(sample_bilinear(ts, {1.0, 1.0}), 255.0);
  EXPECT_DOUBLE_EQ(sample_bilinear(ts, {0.5, 0.0}), 127.5);
  EXPECT_EQ(error_code_of([&] { sample_bilinear(ts, {-0.5, 0.0}); }), ErrorCode::kSampleOutOfBounds);
  EXPECT_FALSE(ts.sample({-0.5, 0.0}).has_value());
}

TEST(Sample, GradientOfBilinearInterpolant) {
  const TimeSurface ts = grid(4, 4, [](int x, int y) { return 3.0 * x - 2.0 * y + 0.5 * x * y; });
  const auto s = ts.sample_with_gradient({1.25, 2.5});
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(s->value, 3.0 * 1.25 - 2.0 * 2.5 + 0.5 * 1.25 * 2.5, 1e-12);
  EXPECT_NEAR(s->gradient.x(), 3.0 + 0.5 * 2.5, 1e-12);
  EXPECT_NEAR(s->gradient.y(), -2.0 + 0.5 * 1.25, 1e-12);
}

TEST(Gradient, Examples) {
  const TimeSurface flat = grid(5, 5, [](int, int) { return 7.0; });
  EXPECT_TRUE(gradient(flat, {2.0, 2.0}).isZero());
  const TimeSurface ramp = grid(5, 5, [](int x, int) { return 2.0 * x; });
  EXPECT_TRUE(gradient(ramp, {2.3, 1.7}).isApprox(Eigen::Vector2d(2.0, 0.0)));
  EXPECT_EQ(error_code_of([&] { gradient(ramp, {0.0, 2.0}); }), ErrorCode::kGradientOutOfBounds);
}

TEST(CountActive, Threshold) {
  const TimeSurface ts = grid(4, 1, [](int x, int) { return 40.0 * x; });
  EXPECT_EQ(count_active(ts, 50.0), 2);
}

TEST(ObservationHistory, BoundedAndOrdered) {
  ObservationHistory h(3);
  for (int i = 0; i < 5; ++i) h.push({static_cast<double>(i), {}, {}});
  EXPECT_EQ(h.size(), 3u);
  EXPECT_DOUBLE_EQ(h.latest()->t, 4.0);
  const auto r = h.recent(2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r[0]->t, 3.0);
  EXPECT_DOUBLE_EQ(r[1]->t, 4.0);
}

TEST(ObservationHistory, ConcurrentReadersSeeConsistentSnapshots) {
  ObservationHistory h(10);
  std::thread writer([&] {
    for (int i = 0; i < 2000; ++i) h.push({static_cast<double>(i), {}, {}});
  });
  std::thread reader([&] {
    for (int i = 0; i < 2000; ++i) {
      const auto r = h.recent(5);
      for (std::size_t k = 1; k < r.size(); ++k) ASSERT_LT(r[k - 1]->t, r[k]->t);
    }
  });
  writer.join();
  reader.join();
  EXPECT_DOUBLE_EQ(h.latest()->t, 1999.0);
}

}  // namespace
}  // namespace esvo
