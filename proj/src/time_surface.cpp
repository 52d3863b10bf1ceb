#include "esvo/time_surface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "esvo/error.hpp"

namespace esvo {

namespace {
constexpr double kMonotonicSlack = 1e-6;
}

LastEventMap::LastEventMap(int width, int height)
    : width_(width),
      height_(height),
      t_last_(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::quiet_NaN()),
      latest_(-std::numeric_limits<double>::infinity()) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "bad map size");
}

bool LastEventMap::fired(int x, int y) const { return !std::isnan(last(x, y)); }

void LastEventMap::ingest(std::span<const Event> batch) {
  // Validate first so a bad batch leaves the map untouched.
  double latest = latest_;
  for (const Event& e : batch) {
    if (e.x >= width_ || e.y >= height_)
      throw Error(ErrorCode::kPixelOutOfRange,
                  "pixel out of range: (" + std::to_string(e.x) + ", " + std::to_string(e.y) + ")");
    if (e.t < latest - kMonotonicSlack) throw Error(ErrorCode::kNonMonotonicStream, "non-monotonic stream");
    latest = std::max(latest, e.t);
  }
  for (const Event& e : batch) {
    double& slot = t_last_[static_cast<std::size_t>(e.y) * width_ + e.x];
    if (std::isnan(slot) || e.t > slot) slot = e.t;
  }
  latest_ = latest;
}

TimeSurface::TimeSurface(int width, int height, double t, double eta, std::vector<double> values,
                         bool inverted)
    : width_(width), height_(height), t_(t), eta_(eta), values_(std::move(values)), inverted_(inverted) {
  if (values_.size() != static_cast<std::size_t>(width) * height)
    throw Error(ErrorCode::kInvalidArgument, "time surface size mismatch");
}

std::vector<double> TimeSurface::values() const {
  if (!inverted_) return values_;
  std::vector<double> out(values_.size());
  std::transform(values_.begin(), values_.end(), out.begin(), [](double v) { return 255.0 - v; });
  return out;
}

bool TimeSurface::operator==(const TimeSurface& other) const {
  return width_ == other.width_ && height_ == other.height_ && t_ == other.t_ &&
         eta_ == other.eta_ && inverted_ == other.inverted_ && values_ == other.values_;
}

std::optional<double> TimeSurface::sample(const Eigen::Vector2d& p) const {
  if (!in_bounds(p)) return std::nullopt;
  const int x0 = std::min(static_cast<int>(p.x()), width_ - 2);
  const int y0 = std::min(static_cast<int>(p.y()), height_ - 2);
  const double ax = p.x() - x0;
  const double ay = p.y() - y0;
  const double* row0 = values_.data() + static_cast<std::size_t>(y0) * width_ + x0;
  const double* row1 = row0 + width_;
  const double v = (1.0 - ay) * ((1.0 - ax) * row0[0] + ax * row0[1]) +
                   ay * ((1.0 - ax) * row1[0] + ax * row1[1]);
  return inverted_ ? 255.0 - v : v;
}

std::optional<SurfaceSample> TimeSurface::sample_with_gradient(const Eigen::Vector2d& p) const {
  if (!in_bounds(p)) return std::nullopt;
  // At integer coordinates the derivative is taken from the cell to the
  // lower-right (clamped at the last row/column).
  const int x0 = std::min(static_cast<int>(p.x()), width_ - 2);
  const int y0 = std::min(static_cast<int>(p.y()), height_ - 2);
  const double ax = p.x() - x0;
  const double ay = p.y() - y0;
  const double* row0 = values_.data() + static_cast<std::size_t>(y0) * width_ + x0;
  const double* row1 = row0 + width_;
  const double top = (1.0 - ax) * row0[0] + ax * row0[1];
  const double bottom = (1.0 - ax) * row1[0] + ax * row1[1];
  SurfaceSample s;
  s.value = (1.0 - ay) * top + ay * bottom;
  s.gradient.x() = (1.0 - ay) * (row0[1] - row0[0]) + ay * (row1[1] - row1[0]);
  s.gradient.y() = bottom - top;
  if (inverted_) {
    s.value = 255.0 - s.value;
    s.gradient = -s.gradient;
  }
  return s;
}

TimeSurface render(const LastEventMap& map, double t, double eta) {
  if (!(eta > 0.0)) throw Error(ErrorCode::kInvalidDecay, "invalid decay");
  if (t < map.latest() - kMonotonicSlack)
    throw Error(ErrorCode::kInvalidArgument, "render time precedes ingested events");
  const auto& last = map.data();
  std::vector<double> values(last.size(), 0.0);
  for (std::size_t i = 0; i < last.size(); ++i) {
    if (std::isnan(last[i])) continue;
    const double age = std::max(0.0, t - last[i]);
    values[i] = 255.0 * std::exp(-age / eta);
  }
  return TimeSurface(map.width(), map.height(), t, eta, std::move(values));
}

TimeSurface negative(const TimeSurface& ts) {
  return TimeSurface(ts.width(), ts.height(), ts.t(), ts.eta(), ts.raw(), !ts.inverted());
}

std::vector<double> gaussian_kernel(int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw Error(ErrorCode::kInvalidArgument, "blur kernel size must be odd and >= 1");
  const int half = kernel_size / 2;
  const double sigma = kernel_size / 6.0;
  std::vector<double> k(kernel_size);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + half];
  }
  for (double& w : k) w /= sum;
  return k;
}

TimeSurface blur(const TimeSurface& ts, int kernel_size) {
  const std::vector<double> k = gaussian_kernel(kernel_size);
  if (kernel_size == 1) return TimeSurface(ts.width(), ts.height(), ts.t(), ts.eta(), ts.values());
  const int w = ts.width();
  const int h = ts.height();
  const int half = kernel_size / 2;
  const std::vector<double> src = ts.values();
  std::vector<double> tmp(src.size());
  std::vector<double> dst(src.size());
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) acc += k[i + half] * row[std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i)
        acc += k[i + half] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      dst[static_cast<std::size_t>(y) * w + x] = std::clamp(acc, 0.0, 255.0);
    }
  }
  return TimeSurface(w, h, ts.t(), ts.eta(), std::move(dst));
}

double sample_bilinear(const TimeSurface& ts, const Eigen::Vector2d& p) {
  const auto v = ts.sample(p);
  if (!v) throw Error(ErrorCode::kSampleOutOfBounds, "sample out of bounds");
  return *v;
}

Eigen::Vector2d gradient(const TimeSurface& ts, const Eigen::Vector2d& p) {
  if (!(p.x() >= 1.0 && p.y() >= 1.0 && p.x() <= ts.width() - 2 && p.y() <= ts.height() - 2))
    throw Error(ErrorCode::kGradientOutOfBounds, "gradient out of bounds");
  const Eigen::Vector2d dx(1.0, 0.0);
  const Eigen::Vector2d dy(0.0, 1.0);
  return {0.5 * (*ts.sample(p + dx) - *ts.sample(p - dx)),
          0.5 * (*ts.sample(p + dy) - *ts.sample(p - dy))};
}

int count_active(const TimeSurface& ts, double threshold) {
  int n = 0;
  for (int y = 0; y < ts.height(); ++y)
    for (int x = 0; x < ts.width(); ++x)
      if (ts.at(x, y) > threshold) ++n;
  return n;
}

ObservationHistory::ObservationHistory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kInvalidArgument, "history capacity must be positive");
}

void ObservationHistory::push(StereoObservation obs) {
  auto item = std::make_shared<const StereoObservation>(std::move(obs));
  std::unique_lock lock(mutex_);
  items_.push_back(std::move(item));
  while (items_.size() > capacity_) items_.pop_front();
}

std::shared_ptr<const StereoObservation> ObservationHistory::latest() const {
  std::shared_lock lock(mutex_);
  return items_.empty() ? nullptr : items_.back();
}

std::vector<std::shared_ptr<const StereoObservation>> ObservationHistory::recent(std::size_t count) const {
  std::shared_lock lock(mutex_);
  const std::size_t n = std::min(count, items_.size());
  return {items_.end() - static_cast<std::ptrdiff_t>(n), items_.end()};
}

std::size_t ObservationHistory::size() const {
  std::shared_lock lock(mutex_);
  return items_.size();
}

}  // namespace esvo
