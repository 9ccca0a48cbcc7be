#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace orbitfilter {

/// Affine downlink: a session costs base_latency_s once, then each image
/// costs per_image_s plus Gaussian jitter (clamped so no image costs < 0).
struct LinkParams {
  double base_latency_s = 0.0;
  double per_image_s = 0.0;
  double jitter_std_s = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError if a < 0, b <= 0 or jitter < 0.
  void validate() const;

  friend bool operator==(const LinkParams&, const LinkParams&) = default;
};

/// b = bytes_per_image / bandwidth + per_image_overhead.
double per_image_from_bandwidth(double bytes_per_image, double bandwidth_bytes_per_s,
                                double per_image_overhead_s);

struct TransmitRecord {
  std::size_t images = 0;
  std::vector<double> completion_s;  // per image, non-decreasing
  double transmission_time_s = 0.0;  // equals the last timestamp, or 0
};

/// Sends n images over the link. n == 0 opens no session and costs 0 s.
/// Jitter draws come from the (seed, "jitter") stream.
TransmitRecord transmit(std::size_t n, const LinkParams& params);

struct CalibrationPoint {
  double images;
  double seconds;
};

struct Calibration {
  LinkParams params;
  double residual_ss = 0.0;  // sum of squared residuals
};

/// Least-squares affine fit seconds = a + b * images. Needs at least two
/// distinct image counts. The fitted b must be positive for a usable link.
Calibration calibrate(std::span<const CalibrationPoint> points);

}  // namespace orbitfilter
