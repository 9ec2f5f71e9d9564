#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "xgft/tensor.hpp"

namespace xgft {

// Binary PPM (P6), 8-bit RGB.
inline void write_ppm(const std::string& path, int width, int height,
                      const std::uint8_t* rgb) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), "ppm: cannot write '" + path + "'");
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb),
           static_cast<std::streamsize>(width) * height * 3);
  check(os.good(), "ppm: write failed for '" + path + "'");
}

// Grayscale PPM: equal channels, matrix normalized symmetrically around zero.
inline void write_gray_ppm(const std::string& path, const Tensor& m) {
  check(m.ndim() == 2, "ppm: expects a matrix");
  double peak = 0;
  for (double v : m.data) peak = std::max(peak, std::fabs(v));
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(m.numel()) * 3);
  for (long i = 0; i < m.numel(); ++i) {
    const double unit = peak > 0 ? m.data[static_cast<std::size_t>(i)] / peak : 0.0;
    const auto g = static_cast<std::uint8_t>(128.0 + unit * 127.0);
    rgb[static_cast<std::size_t>(i) * 3 + 0] = g;
    rgb[static_cast<std::size_t>(i) * 3 + 1] = g;
    rgb[static_cast<std::size_t>(i) * 3 + 2] = g;
  }
  write_ppm(path, m.cols(), m.rows(), rgb.data());
}

}  // namespace xgft
