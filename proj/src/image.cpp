#include "ctct/image.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ctct/error.hpp"

namespace ctct {

Homography Homography::translation(double dx, double dy) {
  Homography h;
  h.m = {1, 0, dx, 0, 1, dy, 0, 0, 1};
  return h;
}

Homography Homography::rotation_deg(double degrees, double cx, double cy) {
  double a = degrees * M_PI / 180.0;
  double c = std::cos(a), s = std::sin(a);
  // rotate about (cx, cy)
  Homography h;
  h.m = {c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy, 0, 0, 1};
  return h;
}

Homography Homography::shear_x(double factor, double cy) {
  Homography h;
  h.m = {1, factor, -factor * cy, 0, 1, 0, 0, 0, 1};
  return h;
}

Homography Homography::scale(double sx, double sy) {
  Homography h;
  h.m = {sx, 0, 0, 0, sy, 0, 0, 0, 1};
  return h;
}

double Homography::det() const {
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> mm(m.data());
  return mm.determinant();
}

Homography Homography::inverse() const {
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> mm(m.data());
  if (std::abs(mm.determinant()) <= 1e-12)
    throw Error(ErrorKind::SingularHomography, "|det| <= 1e-12");
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> inv = mm.inverse();
  Homography out;
  if (inv(2, 2) != 0.0) inv /= inv(2, 2);
  for (int i = 0; i < 9; ++i) out.m[i] = inv(i / 3, i % 3);
  return out;
}

Homography Homography::compose(const Homography& inner) const {
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> a(m.data());
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> b(inner.m.data());
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> c = a * b;
  if (c(2, 2) != 0.0) c /= c(2, 2);
  Homography out;
  for (int i = 0; i < 9; ++i) out.m[i] = c(i / 3, i % 3);
  return out;
}

void Homography::apply(double x, double y, double& ox, double& oy) const {
  double w = m[6] * x + m[7] * y + m[8];
  ox = (m[0] * x + m[1] * y + m[2]) / w;
  oy = (m[3] * x + m[4] * y + m[5]) / w;
}

Homography Homography::from_corner_offsets(int w, int h, const std::array<double, 8>& off) {
  double sx[4] = {0, double(w - 1), double(w - 1), 0};
  double sy[4] = {0, 0, double(h - 1), double(h - 1)};
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    double dx = sx[i] + off[2 * i], dy = sy[i] + off[2 * i + 1];
    a(2 * i, 0) = sx[i];
    a(2 * i, 1) = sy[i];
    a(2 * i, 2) = 1;
    a(2 * i, 6) = -sx[i] * dx;
    a(2 * i, 7) = -sy[i] * dx;
    a(2 * i + 1, 3) = sx[i];
    a(2 * i + 1, 4) = sy[i];
    a(2 * i + 1, 5) = 1;
    a(2 * i + 1, 6) = -sx[i] * dy;
    a(2 * i + 1, 7) = -sy[i] * dy;
    rhs(2 * i) = dx;
    rhs(2 * i + 1) = dy;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!lu.isInvertible())
    throw Error(ErrorKind::SingularHomography, "degenerate corner configuration");
  Eigen::Matrix<double, 8, 1> v = lu.solve(rhs);
  Homography out;
  out.m = {v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), 1.0};
  if (std::abs(out.det()) <= 1e-12)
    throw Error(ErrorKind::SingularHomography, "degenerate corner configuration");
  return out;
}

Image rgb_to_gray(const Image& r, const Image& g, const Image& b) {
  if (!r.same_size(g) || !r.same_size(b))
    throw Error(ErrorKind::DimensionMismatch, "rgb_to_gray channel sizes differ");
  Image out(r.height, r.width);
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = 0.299f * r.pixels[i] + 0.587f * g.pixels[i] + 0.114f * b.pixels[i];
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h == img.height && out_w == img.width) return img;
  Image out(out_h, out_w);
  double sy = static_cast<double>(img.height) / out_h;
  double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::min(std::max(y0, 0), img.height - 1);
    int y1c = std::min(std::max(y0 + 1, 0), img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::min(std::max(x0, 0), img.width - 1);
      int x1c = std::min(std::max(x0 + 1, 0), img.width - 1);
      double top = (1 - wx) * img.at(y0c, x0c) + wx * img.at(y0c, x1c);
      double bot = (1 - wx) * img.at(y1c, x0c) + wx * img.at(y1c, x1c);
      out.at(y, x) = static_cast<float>((1 - wy) * top + wy * bot);
    }
  }
  return out;
}

Image resize_fixed_height(const Image& img, int target_h) {
  if (target_h < 1) throw Error(ErrorKind::InvalidConfig, "target height must be >= 1");
  int out_w = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(img.width) * target_h / img.height)));
  return resize_bilinear(img, target_h, out_w);
}

Image warp_perspective(const Image& img, const Homography& h, float fill) {
  Homography inv = h.inverse();
  Image out(img.height, img.width);
  auto sample = [&](int y, int x) -> double {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return fill;
    return img.at(y, x);
  };
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double sx, sy;
      inv.apply(x, y, sx, sy);
      int x0 = static_cast<int>(std::floor(sx));
      int y0 = static_cast<int>(std::floor(sy));
      double wx = sx - x0, wy = sy - y0;
      double top = (1 - wx) * sample(y0, x0) + wx * sample(y0, x0 + 1);
      double bot = (1 - wx) * sample(y0 + 1, x0) + wx * sample(y0 + 1, x0 + 1);
      out.at(y, x) = static_cast<float>((1 - wy) * top + wy * bot);
    }
  }
  return out;
}

Image alpha_composite(const Image& fg, const Image& alpha, const Image& bg) {
  if (!fg.same_size(alpha) || !fg.same_size(bg))
    throw Error(ErrorKind::DimensionMismatch, "alpha_composite layer sizes differ");
  Image out(fg.height, fg.width);
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    float a = alpha.pixels[i];
    out.pixels[i] = a * fg.pixels[i] + (1.f - a) * bg.pixels[i];
  }
  return out;
}

}  // namespace ctct
