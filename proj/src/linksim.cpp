#include "orbitfilter/linksim.hpp"

#include <algorithm>
#include <cmath>

#include "orbitfilter/error.hpp"
#include "orbitfilter/rng.hpp"

namespace orbitfilter {

void LinkParams::validate() const {
  if (!(base_latency_s >= 0.0) || !std::isfinite(base_latency_s)) {
    throw ConfigError("link.base_latency_s must be finite and >= 0");
  }
  if (!(per_image_s > 0.0) || !std::isfinite(per_image_s)) {
    throw ConfigError("link.per_image_s must be finite and > 0");
  }
  if (!(jitter_std_s >= 0.0) || !std::isfinite(jitter_std_s)) {
    throw ConfigError("link.jitter_std_s must be finite and >= 0");
  }
}

double per_image_from_bandwidth(double bytes_per_image, double bandwidth_bytes_per_s,
                                double per_image_overhead_s) {
  if (!(bytes_per_image > 0.0)) throw ConfigError("link.bytes_per_image must be > 0");
  if (!(bandwidth_bytes_per_s > 0.0)) throw ConfigError("link.bandwidth_bytes_per_s must be > 0");
  if (!(per_image_overhead_s >= 0.0)) throw ConfigError("link.per_image_overhead_s must be >= 0");
  return bytes_per_image / bandwidth_bytes_per_s + per_image_overhead_s;
}

TransmitRecord transmit(std::size_t n, const LinkParams& params) {
  params.validate();
  TransmitRecord r;
  r.images = n;
  if (n == 0) return r;
  r.completion_s.reserve(n);
  if (params.jitter_std_s == 0.0) {
    // Closed form so that the total is exactly a + n*b.
    for (std::size_t i = 1; i <= n; ++i) {
      r.completion_s.push_back(params.base_latency_s + static_cast<double>(i) * params.per_image_s);
    }
  } else {
    Rng jitter(params.seed, "jitter");
    double clock = params.base_latency_s;
    for (std::size_t i = 0; i < n; ++i) {
      clock += std::max(0.0, params.per_image_s + jitter.normal(0.0, params.jitter_std_s));
      r.completion_s.push_back(clock);
    }
  }
  r.transmission_time_s = r.completion_s.back();
  return r;
}

Calibration calibrate(std::span<const CalibrationPoint> points) {
  if (points.size() < 2) throw Error("calibrate: need at least two (images, seconds) points");
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& p : points) {
    mean_x += p.images;
    mean_y += p.seconds;
  }
  mean_x /= static_cast<double>(points.size());
  mean_y /= static_cast<double>(points.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.images - mean_x) * (p.images - mean_x);
    sxy += (p.images - mean_x) * (p.seconds - mean_y);
  }
  if (sxx == 0.0) throw Error("calibrate: all points share the same image count");
  Calibration c;
  c.params.per_image_s = sxy / sxx;
  c.params.base_latency_s = mean_y - c.params.per_image_s * mean_x;
  for (const auto& p : points) {
    const double r = p.seconds - (c.params.base_latency_s + c.params.per_image_s * p.images);
    c.residual_ss += r * r;
  }
  return c;
}

}  // namespace orbitfilter
