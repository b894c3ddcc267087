#pragma once

#include "rtk/image.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace rtk::testing {

inline Frame random_frame(std::mt19937_64& rng, int w, int h, int channels) {
  Frame f = Frame::filled(w, h, channels, 0);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& v : f.data) {
    v = static_cast<std::uint8_t>(d(rng));
  }
  return f;
}

// `base` plus bounded noise, so pairs have structure in common.
inline Frame perturbed(std::mt19937_64& rng, const Frame& base, int amplitude) {
  Frame f = base;
  std::uniform_int_distribution<int> d(-amplitude, amplitude);
  for (auto& v : f.data) {
    v = static_cast<std::uint8_t>(std::clamp(int(v) + d(rng), 0, 255));
  }
  return f;
}

inline double naive_mse(const Frame& a, const Frame& b) {
  double s = 0.0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      for (int c = 0; c < a.channels; ++c) {
        const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        s += d * d;
      }
    }
  }
  return s / (double(a.width) * a.height * a.channels);
}

// Direct per-window SSIM with a 2D Gaussian (11x11, sigma 1.5), two-pass
// moments, over windows fully inside the image.
inline double naive_ssim_plane(const std::function<double(int, int)>& a, const std::function<double(int, int)>& b,
                               int w, int h) {
  double g[11][11];
  double gsum = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      gsum += g[i][j];
    }
  }
  const double c1 = std::pow(0.01 * 255, 2);
  const double c2 = std::pow(0.03 * 255, 2);
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + 11 <= h; ++y0) {
    for (int x0 = 0; x0 + 11 <= w; ++x0) {
      double ma = 0.0;
      double mb = 0.0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          ma += g[i][j] / gsum * a(x0 + j, y0 + i);
          mb += g[i][j] / gsum * b(x0 + j, y0 + i);
        }
      }
      double va = 0.0;
      double vb = 0.0;
      double cov = 0.0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double da = a(x0 + j, y0 + i) - ma;
          const double db = b(x0 + j, y0 + i) - mb;
          va += g[i][j] / gsum * da * da;
          vb += g[i][j] / gsum * db * db;
          cov += g[i][j] / gsum * da * db;
        }
      }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

inline double naive_ssim(const Frame& a, const Frame& b, bool per_channel = false) {
  const auto luma = [](const Frame& f) {
    return [&f](int x, int y) {
      if (f.channels == 1) {
        return double(f.at(x, y));
      }
      return 0.299 * f.at(x, y, 0) + 0.587 * f.at(x, y, 1) + 0.114 * f.at(x, y, 2);
    };
  };
  if (!per_channel || a.channels == 1) {
    return naive_ssim_plane(luma(a), luma(b), a.width, a.height);
  }
  double s = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    s += naive_ssim_plane([&](int x, int y) { return double(a.at(x, y, c)); },
                          [&](int x, int y) { return double(b.at(x, y, c)); }, a.width, a.height);
  }
  return s / a.channels;
}

// Best score over every j with |j - k| <= w; the last frame of b when that
// set is empty.
inline std::vector<double> naive_windowed(std::size_t na, std::size_t nb, std::size_t w, bool lower,
                                          const std::function<double(std::size_t, std::size_t)>& score) {
  std::vector<double> out;
  for (std::size_t k = 0; k < na; ++k) {
    bool any = false;
    double best = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t gap = j > k ? j - k : k - j;
      if (gap > w) {
        continue;
      }
      const double s = score(k, j);
      if (!any || (lower ? s < best : s > best)) {
        best = s;
      }
      any = true;
    }
    out.push_back(any ? best : score(k, nb - 1));
  }
  return out;
}

} // namespace rtk::testing
