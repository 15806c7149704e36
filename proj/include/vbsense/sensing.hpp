#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vbsense/errors.hpp"
#include "vbsense/obstruction.hpp"
#include "vbsense/polarimetry.hpp"
#include "vbsense/random.hpp"

namespace vbsense::sensing {

/// Calibration of one photodetector channel. A raw reading at nominal time
/// t models gain * I(t - skew) + offset + Gaussian noise.
struct DetectorChannel {
  std::string label;       ///< one of H, V, D, A
  double gain = 1.0;       ///< dimensionless, > 0
  double offset = 0.0;     ///< power units
  double noise_sigma = 0;  ///< power units per sample, >= 0
  double skew = 0.0;       ///< s, |skew| <= 1.3 ns by default

  void validate(double skew_bound = 1.3e-9) const {
    if (gain <= 0) throw config_error("channel " + label + ": gain must be > 0");
    if (noise_sigma < 0) throw config_error("channel " + label + ": noise_sigma must be >= 0");
    if (std::abs(skew) > skew_bound)
      throw config_error("channel " + label + ": |skew| exceeds bound");
  }
};

inline std::array<DetectorChannel, 4> default_channels(double noise_sigma = 0.0) {
  return {DetectorChannel{"H", 1, 0, noise_sigma, 0}, DetectorChannel{"V", 1, 0, noise_sigma, 0},
          DetectorChannel{"D", 1, 0, noise_sigma, 0}, DetectorChannel{"A", 1, 0, noise_sigma, 0}};
}

/// Time-indexed raw 4-channel detector samples with per-channel calibration.
struct TraceSet {
  double sample_period = 0;  ///< s
  double t0 = 0;             ///< time of sample 0, s
  std::array<DetectorChannel, 4> channels;
  std::array<std::vector<double>, 4> samples;

  std::size_t length() const { return samples[0].size(); }
  double time_of(std::size_t k) const { return t0 + static_cast<double>(k) * sample_period; }

  void validate() const {
    if (sample_period <= 0) throw config_error("trace: sample_period must be > 0");
    for (int c = 1; c < 4; ++c)
      if (samples[c].size() != samples[0].size())
        throw config_error("trace: channel sample counts differ");
  }
};

/// Forward model: evaluate the four polarizer intensities along a
/// trajectory, apply per-channel gain/offset/skew and add seeded white
/// Gaussian noise. Bit-reproducible for a fixed seed.
inline TraceSet synthesize(const beam::VectorField& field, const obstruction::Trajectory& traj,
                           const obstruction::Obstacle& shape,
                           const std::array<DetectorChannel, 4>& channels, double sample_period,
                           double duration, std::uint64_t seed) {
  if (sample_period <= 0) throw config_error("synthesize: sample_period must be > 0");
  if (duration <= 0) throw config_error("synthesize: duration must be > 0");
  for (const auto& ch : channels) ch.validate();

  const polarimetry::Tomography tomo = polarimetry::tomography(field);
  TraceSet trace;
  trace.sample_period = sample_period;
  trace.t0 = traj.t_start();
  trace.channels = channels;
  const auto n = static_cast<std::size_t>(std::floor(duration / sample_period)) + 1;
  if (trace.t0 + static_cast<double>(n - 1) * sample_period > traj.t_end() + 1e-15)
    throw std::out_of_range("synthesize: duration exceeds trajectory span");
  for (auto& s : trace.samples) s.resize(n);

  bool same_skew = true;
  for (int c = 1; c < 4; ++c) same_skew &= channels[c].skew == channels[0].skew;

  obstruction::Pose cached_pose{};
  std::array<double, 4> cached_inten{};
  bool have_cache = false;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = trace.time_of(k);
    std::array<double, 4> inten;
    if (same_skew) {
      const double te = std::clamp(t - channels[0].skew, traj.t_start(), traj.t_end());
      const obstruction::Pose pose = obstruction::pose_at(traj, te);
      if (have_cache && pose.x0 == cached_pose.x0 && pose.y0 == cached_pose.y0 &&
          pose.theta == cached_pose.theta) {
        inten = cached_inten;
      } else {
        inten = polarimetry::intensities(tomo, shape.with_pose(pose));
        cached_pose = pose;
        cached_inten = inten;
        have_cache = true;
      }
    } else {
      for (int c = 0; c < 4; ++c) {
        const double te = std::clamp(t - channels[c].skew, traj.t_start(), traj.t_end());
        const auto all = polarimetry::intensities(tomo, shape.with_pose(obstruction::pose_at(traj, te)));
        inten[c] = all[c];
      }
    }
    for (int c = 0; c < 4; ++c) {
      double v = channels[c].gain * inten[c] + channels[c].offset;
      if (channels[c].noise_sigma > 0)
        v += channels[c].noise_sigma * gaussian_sample(seed, k * 4 + static_cast<std::uint64_t>(c));
      trace.samples[c][k] = v;
    }
  }
  return trace;
}

namespace detail {

/// Channel value at nominal time t, skew-aligned by linear interpolation
/// between raw samples and corrected for gain/offset.
inline double aligned_value(const TraceSet& tr, int channel, double t) {
  const DetectorChannel& ch = tr.channels[channel];
  const double pos = (t + ch.skew - tr.t0) / tr.sample_period;
  const auto n = tr.samples[channel].size();
  const double clamped = std::clamp(pos, 0.0, static_cast<double>(n - 1));
  const auto k0 = static_cast<std::size_t>(std::floor(clamped));
  const std::size_t k1 = std::min(k0 + 1, n - 1);
  const double u = clamped - static_cast<double>(k0);
  const double raw = (1.0 - u) * tr.samples[channel][k0] + u * tr.samples[channel][k1];
  return (raw - ch.offset) / ch.gain;
}

}  // namespace detail

/// Mean calibrated intensity per channel over [t_start, t_start + t_len).
inline std::array<double, 4> integrate_window(const TraceSet& trace, double t_start, double t_len) {
  trace.validate();
  const double t_last = trace.time_of(trace.length() - 1);
  if (t_len <= 0 || t_start < trace.t0 - 0.5 * trace.sample_period ||
      t_start + t_len > t_last + 1.5 * trace.sample_period)
    throw std::out_of_range("integrate_window: window outside trace");
  const auto k_lo = static_cast<std::size_t>(std::ceil((t_start - trace.t0) / trace.sample_period - 1e-9));
  const auto k_hi_f = (t_start + t_len - trace.t0) / trace.sample_period - 1e-9;
  const auto k_hi = static_cast<std::size_t>(std::floor(std::max(0.0, k_hi_f)));
  if (k_hi < k_lo || k_lo >= trace.length())
    throw std::out_of_range("integrate_window: empty window");
  std::array<double, 4> mean{};
  const std::size_t last = std::min<std::size_t>(k_hi, trace.length() - 1);
  for (int c = 0; c < 4; ++c) {
    double acc = 0;
    for (std::size_t k = k_lo; k <= last; ++k) acc += detail::aligned_value(trace, c, trace.time_of(k));
    mean[c] = acc / static_cast<double>(last - k_lo + 1);
  }
  return mean;
}

/// Trace CSV export with header row `t,h,v,d,a`.
inline void export_csv(const TraceSet& trace, const std::string& path,
                       const std::string& provenance = {}) {
  std::ofstream f(path);
  if (!f) throw parse_error("cannot open for writing: " + path);
  if (!provenance.empty()) f << "# " << provenance << "\n";
  f << "t,h,v,d,a\n";
  char buf[200];
  for (std::size_t k = 0; k < trace.length(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", trace.time_of(k),
                  trace.samples[0][k], trace.samples[1][k], trace.samples[2][k],
                  trace.samples[3][k]);
    f << buf;
  }
}

/// Per-channel calibration from a JSON list of
/// {label, gain, offset, noise_sigma, skew}.
inline std::array<DetectorChannel, 4> load_calibration_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw parse_error("cannot open calibration file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("calibration JSON: ") + e.what());
  }
  if (!j.is_array() || j.size() != 4)
    throw parse_error("calibration JSON: expected a list of 4 channels");
  std::array<DetectorChannel, 4> ch = default_channels();
  const std::array<std::string, 4> order = {"H", "V", "D", "A"};
  std::array<bool, 4> seen{};
  for (const auto& rec : j) {
    DetectorChannel c;
    c.label = rec.value("label", "");
    c.gain = rec.value("gain", 1.0);
    c.offset = rec.value("offset", 0.0);
    c.noise_sigma = rec.value("noise_sigma", 0.0);
    c.skew = rec.value("skew", 0.0);
    c.validate();
    bool matched = false;
    for (int k = 0; k < 4; ++k)
      if (c.label == order[k]) {
        ch[k] = c;
        seen[k] = true;
        matched = true;
      }
    if (!matched) throw parse_error("calibration JSON: unknown channel label '" + c.label + "'");
  }
  for (int k = 0; k < 4; ++k)
    if (!seen[k]) throw parse_error("calibration JSON: missing channel " + order[k]);
  return ch;
}

/// Parse a trace CSV and return a skew-aligned, gain/offset-corrected
/// TraceSet (identity calibration, noise_sigma preserved for inference).
inline TraceSet ingest(const std::string& path, const std::array<DetectorChannel, 4>& calibration) {
  std::ifstream f(path);
  if (!f) throw parse_error("cannot open trace file: " + path);
  std::string line;
  long line_no = 0;
  // skip provenance comments, then require the header row
  do {
    if (!std::getline(f, line)) throw parse_error("trace CSV: empty file", line_no);
    ++line_no;
  } while (!line.empty() && line[0] == '#');
  {
    std::string stripped;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) stripped += std::tolower(c);
    if (stripped != "t,h,v,d,a") {
      const std::array<std::string, 5> cols = {"t", "h", "v", "d", "a"};
      for (const auto& col : cols)
        if (stripped.find(col) == std::string::npos)
          throw parse_error("trace CSV: missing column '" + col + "'", line_no);
      throw parse_error("trace CSV: expected header t,h,v,d,a", line_no);
    }
  }

  TraceSet raw;
  raw.channels = calibration;
  std::vector<double> times;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    double vals[5];
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      if (n >= 5) throw parse_error("trace CSV: too many columns", line_no);
      try {
        std::size_t used = 0;
        vals[n] = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw parse_error("trace CSV: malformed number '" + cell + "'", line_no);
      }
      ++n;
    }
    if (n != 5) throw parse_error("trace CSV: expected 5 columns, got " + std::to_string(n), line_no);
    if (!times.empty() && vals[0] <= times.back())
      throw parse_error("trace CSV: non-monotonic time", line_no);
    times.push_back(vals[0]);
    for (int c = 0; c < 4; ++c) raw.samples[c].push_back(vals[c + 1]);
  }
  if (times.size() < 2) throw parse_error("trace CSV: needs at least 2 samples", line_no);
  raw.t0 = times.front();
  raw.sample_period = (times.back() - times.front()) / static_cast<double>(times.size() - 1);

  TraceSet out;
  out.t0 = raw.t0;
  out.sample_period = raw.sample_period;
  out.channels = default_channels();
  for (int c = 0; c < 4; ++c) {
    out.channels[c].label = calibration[c].label;
    out.channels[c].noise_sigma = calibration[c].noise_sigma / calibration[c].gain;
    out.samples[c].resize(times.size());
    for (std::size_t k = 0; k < times.size(); ++k)
      out.samples[c][k] = detail::aligned_value(raw, c, out.t0 + static_cast<double>(k) * out.sample_period);
  }
  return out;
}

}  // namespace vbsense::sensing
