#include <cmath>

#include "xgft/environment.hpp"

namespace xgft {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
  const int i = static_cast<int>(h);
  const double f = h - i;
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  double r, g, b;
  switch (i % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {static_cast<std::uint8_t>(r * 255.0 + 0.5),
          static_cast<std::uint8_t>(g * 255.0 + 0.5),
          static_cast<std::uint8_t>(b * 255.0 + 0.5)};
}

void put(Tile& t, int x, int y, Rgb c, std::uint8_t a = 255) {
  const std::size_t i = static_cast<std::size_t>(y * kTilePixels + x) * 4;
  t.rgba[i + 0] = c.r;
  t.rgba[i + 1] = c.g;
  t.rgba[i + 2] = c.b;
  t.rgba[i + 3] = a;
}

// Upright sprite before rotation/scaling: a 12x12 core with two hue tones in
// a class-keyed pattern and a bright corner marker that breaks rotational
// symmetry.
Tile base_sprite(int cls) {
  Tile t{};
  const double hue = std::fmod(cls * 137.508, 360.0);
  const Rgb tone_a = hsv(hue, 0.78, 0.92);
  const Rgb tone_b = hsv(hue, 0.85, 0.50);
  const Rgb marker = hsv(std::fmod(hue + 180.0, 360.0), 0.30, 0.98);
  for (int y = 2; y < 14; ++y)
    for (int x = 2; x < 14; ++x) {
      const std::uint64_t bits =
          fnv1a64(&x, sizeof(int),
                  fnv1a64(&y, sizeof(int),
                          fnv1a64(&cls, sizeof(int))));
      put(t, x, y, (bits & 3) ? tone_a : tone_b);
    }
  for (int y = 2; y < 5; ++y)
    for (int x = 2; x < 5; ++x) put(t, x, y, marker);
  return t;
}

}  // namespace

Tile sprite_for_class(int cls, double yaw_deg, double scale) {
  check(cls >= 0, "sprite_for_class: unknown class id");
  const Tile src = base_sprite(cls);
  Tile out{};
  const double rad = yaw_deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double ctr = (kTilePixels - 1) / 2.0;
  for (int y = 0; y < kTilePixels; ++y)
    for (int x = 0; x < kTilePixels; ++x) {
      // invert: un-rotate then un-scale around the tile center
      const double dx = x - ctr, dy = y - ctr;
      const double rx = (c * dx + s * dy) / scale;
      const double ry = (-s * dx + c * dy) / scale;
      const long sx = std::lround(rx + ctr);
      const long sy = std::lround(ry + ctr);
      if (sx < 0 || sx >= kTilePixels || sy < 0 || sy >= kTilePixels) continue;
      const std::size_t si = static_cast<std::size_t>(sy * kTilePixels + sx) * 4;
      if (src.rgba[si + 3] == 0) continue;
      const std::size_t di = static_cast<std::size_t>(y * kTilePixels + x) * 4;
      for (int ch = 0; ch < 4; ++ch) out.rgba[di + ch] = src.rgba[si + ch];
    }
  return out;
}

Tile obstacle_tile() {
  Tile t{};
  const Rgb brick{116, 66, 38};
  const Rgb mortar{74, 46, 28};
  for (int y = 0; y < kTilePixels; ++y)
    for (int x = 0; x < kTilePixels; ++x) {
      const bool horizontal = (y % 8) == 0;
      const int shift = ((y / 8) % 2) * 4;
      const bool vertical = ((x + shift) % 8) == 0;
      put(t, x, y, (horizontal || vertical) ? mortar : brick);
    }
  return t;
}

Tile floor_tile() {
  Tile t{};
  const Rgb floor{198, 198, 198};
  const Rgb border{178, 178, 178};
  for (int y = 0; y < kTilePixels; ++y)
    for (int x = 0; x < kTilePixels; ++x) {
      const bool edge = x == 0 || y == 0 || x == kTilePixels - 1 ||
                        y == kTilePixels - 1;
      put(t, x, y, edge ? border : floor);
    }
  return t;
}

}  // namespace xgft
