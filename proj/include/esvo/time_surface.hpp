#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

namespace esvo {

struct Event {
  double t = 0.0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;  // +1 or -1

  bool operator==(const Event&) const = default;
};

/// Per-pixel timestamp of the most recent event. Single writer.
class LastEventMap {
 public:
  LastEventMap(int width, int height);

  /// Events must be time-ordered and not older than anything ingested before
  /// (1 us slack). Throws kPixelOutOfRange / kNonMonotonicStream; on throw the
  /// map is left unchanged.
  void ingest(std::span<const Event> batch);

  int width() const { return width_; }
  int height() const { return height_; }
  /// NaN for pixels that never fired.
  double last(int x, int y) const { return t_last_[static_cast<std::size_t>(y) * width_ + x]; }
  bool fired(int x, int y) const;
  double latest() const { return latest_; }
  const std::vector<double>& data() const { return t_last_; }

 private:
  int width_;
  int height_;
  std::vector<double> t_last_;
  double latest_;
};

/// Bilinear sample together with the exact partial derivatives of the
/// bilinear interpolant at that point.
struct SurfaceSample {
  double value;
  Eigen::Vector2d gradient;
};

/// Exponentially decayed recency grid with values in [0, 255].
///
/// Values are stored as rendered; `negative()` only flips a flag so that
/// applying it twice reproduces the original surface bit-for-bit.
class TimeSurface {
 public:
  TimeSurface() = default;
  TimeSurface(int width, int height, double t, double eta, std::vector<double> values,
              bool inverted = false);

  int width() const { return width_; }
  int height() const { return height_; }
  double t() const { return t_; }
  double eta() const { return eta_; }
  bool inverted() const { return inverted_; }

  double at(int x, int y) const {
    const double v = values_[static_cast<std::size_t>(y) * width_ + x];
    return inverted_ ? 255.0 - v : v;
  }

  /// Materialized values (after any negation), row-major.
  std::vector<double> values() const;
  const std::vector<double>& raw() const { return values_; }

  bool in_bounds(const Eigen::Vector2d& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width_ - 1 && p.y() <= height_ - 1;
  }

  std::optional<double> sample(const Eigen::Vector2d& p) const;
  std::optional<SurfaceSample> sample_with_gradient(const Eigen::Vector2d& p) const;

  bool operator==(const TimeSurface& other) const;

 private:
  int width_ = 0;
  int height_ = 0;
  double t_ = 0.0;
  double eta_ = 0.0;
  std::vector<double> values_;
  bool inverted_ = false;
};

/// 255 * exp(-(t - t_last) / eta) at fired pixels, 0 elsewhere. Throws
/// kInvalidDecay for eta <= 0 and kInvalidArgument if t precedes an event.
TimeSurface render(const LastEventMap& map, double t, double eta);

TimeSurface negative(const TimeSurface& ts);

/// Gaussian blur with sigma = kernel_size / 6 and edge replication.
/// kernel_size must be odd and >= 1.
TimeSurface blur(const TimeSurface& ts, int kernel_size);

/// Normalized 1-D Gaussian weights used by `blur`.
std::vector<double> gaussian_kernel(int kernel_size);

/// Throws kSampleOutOfBounds outside [0, w-1] x [0, h-1].
double sample_bilinear(const TimeSurface& ts, const Eigen::Vector2d& p);

/// Central differences of bilinear samples, one pixel step. Throws
/// kGradientOutOfBounds unless p is at least one pixel inside the border.
Eigen::Vector2d gradient(const TimeSurface& ts, const Eigen::Vector2d& p);

/// Number of pixels whose value exceeds `threshold`.
int count_active(const TimeSurface& ts, double threshold);

struct StereoObservation {
  double t = 0.0;
  TimeSurface left;
  TimeSurface right;
};

/// Bounded history of stereo observations: one writer appends, any number of
/// readers take shared snapshots.
class ObservationHistory {
 public:
  explicit ObservationHistory(std::size_t capacity = 100);

  void push(StereoObservation obs);
  std::shared_ptr<const StereoObservation> latest() const;
  /// Up to `count` most recent observations, oldest first.
  std::vector<std::shared_ptr<const StereoObservation>> recent(std::size_t count) const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::shared_mutex mutex_;
  std::deque<std::shared_ptr<const StereoObservation>> items_;
};

}  // namespace esvo
