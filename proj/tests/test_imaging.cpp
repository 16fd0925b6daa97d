#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ctct/error.hpp"
#include "ctct/image.hpp"
#include "ctct/pgm.hpp"
#include "ctct/rng.hpp"
#include "doctest.h"

using namespace ctct;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  fs::path p = fs::temp_directory_path() / "ctct_imaging_test";
  fs::create_directories(p);
  return p;
}

Image smooth_test_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(y, x) = 0.5f + 0.4f * std::sin(x * 0.18f) * std::cos(y * 0.23f);
  return img;
}

}  // namespace

TEST_CASE("pgm byte mapping") {
  fs::path p = tmp_dir() / "quad.pgm";
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n2 2\n255\n";
    unsigned char bytes[4] = {0, 255, 128, 64};
    out.write(reinterpret_cast<char*>(bytes), 4);
  }
  Image img = load_pgm(p.string());
  CHECK(img.height == 2);
  CHECK(img.width == 2);
  CHECK(img.pixels[0] == doctest::Approx(0.0));
  CHECK(img.pixels[1] == doctest::Approx(1.0));
  CHECK(img.pixels[2] == doctest::Approx(128.0 / 255));
  CHECK(img.pixels[3] == doctest::Approx(64.0 / 255));
}

TEST_CASE("pgm round trip quantizes to 1/255 grid") {
  Rng rng(11);
  Image img(7, 13);
  for (float& v : img.pixels) v = static_cast<float>(rng.next_double());
  fs::path p = tmp_dir() / "rt.pgm";
  save_pgm(img, p.string());
  Image back = load_pgm(p.string());
  REQUIRE(back.same_size(img));
  for (size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 1.0 / 510 + 1e-6);
}

TEST_CASE("pgm rejects ascii P2 and truncation and bad maxval") {
  fs::path p = tmp_dir() / "bad.pgm";
  {
    std::ofstream out(p, std::ios::binary);
    out << "P2\n2 2\n255\n0 1 2 3\n";
  }
  try {
    load_pgm(p.string());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFormat);
  }
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n4 4\n255\nxx";
  }
  try {
    load_pgm(p.string());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncatedFile);
  }
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n1 1\n65535\n";
    out.put(0);
    out.put(0);
  }
  try {
    load_pgm(p.string());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedFormat);
  }
}

TEST_CASE("rgb_to_gray") {
  Image half(3, 4, 0.5f), one(3, 4, 1.f), zero(3, 4, 0.f);
  Image g1 = rgb_to_gray(half, half, half);
  for (float v : g1.pixels) CHECK(v == doctest::Approx(0.5));
  Image g2 = rgb_to_gray(one, one, one);
  for (float v : g2.pixels) CHECK(v == doctest::Approx(1.0));
  Image g3 = rgb_to_gray(one, zero, zero);
  for (float v : g3.pixels) CHECK(v == doctest::Approx(0.299));
  Image other(2, 4, 0.f);
  CHECK_THROWS_AS(rgb_to_gray(one, other, zero), Error);
}

TEST_CASE("resize_fixed_height dimensions") {
  CHECK(resize_fixed_height(Image(64, 128), 32).width == 64);
  CHECK(resize_fixed_height(Image(16, 20), 32).width == 40);
  Image img = smooth_test_image(32, 50);
  Image same = resize_fixed_height(img, 32);
  REQUIRE(same.same_size(img));
  for (size_t i = 0; i < img.pixels.size(); ++i) CHECK(same.pixels[i] == img.pixels[i]);
}

TEST_CASE("resize_fixed_height preserves aspect ratio") {
  Rng rng(5);
  for (int it = 0; it < 50; ++it) {
    int h = rng.uniform_int(5, 120), w = rng.uniform_int(5, 300);
    int th = rng.uniform_int(1, 64);
    Image out = resize_fixed_height(Image(h, w), th);
    CHECK(out.height == th);
    double exact = static_cast<double>(w) * th / h;
    if (exact >= 0.5)
      CHECK(std::abs(out.width - exact) <= 0.5);
    else
      CHECK(out.width == 1);  // width clamp dominates for degenerate shrinks
  }
}

TEST_CASE("warp identity and flip are exact") {
  Image img = smooth_test_image(10, 17);
  Image id = warp_perspective(img, Homography::identity(), 0.f);
  for (size_t i = 0; i < img.pixels.size(); ++i) CHECK(id.pixels[i] == img.pixels[i]);

  Homography flip;
  flip.m = {-1, 0, double(img.width - 1), 0, 1, 0, 0, 0, 1};
  Image mirrored = warp_perspective(img, flip, 0.f);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      CHECK(mirrored.at(y, x) == doctest::Approx(img.at(y, img.width - 1 - x)));
}

TEST_CASE("warp pure translation shifts columns") {
  Image img = smooth_test_image(8, 12);
  const float fill = 0.25f;
  Image out = warp_perspective(img, Homography::translation(1, 0), fill);
  for (int y = 0; y < img.height; ++y) {
    CHECK(out.at(y, 0) == doctest::Approx(fill));
    for (int x = 1; x < img.width; ++x) CHECK(out.at(y, x) == doctest::Approx(img.at(y, x - 1)));
  }
}

TEST_CASE("singular homography rejected") {
  Homography h;
  h.m = {1, 2, 3, 2, 4, 6, 0, 0, 1};  // rank deficient
  CHECK_THROWS_AS(warp_perspective(Image(4, 4), h, 0.f), Error);
}

TEST_CASE("warp then inverse reproduces interior") {
  Rng rng(99);
  Image img = smooth_test_image(40, 80);
  for (int it = 0; it < 10; ++it) {
    std::array<double, 8> off;
    for (double& o : off) o = rng.uniform(-1.5, 1.5);
    Homography h = Homography::from_corner_offsets(img.width, img.height, off);
    Image round = warp_perspective(warp_perspective(img, h, 0.5f), h.inverse(), 0.5f);
    for (int y = 2; y < img.height - 2; ++y)
      for (int x = 2; x < img.width - 2; ++x)
        CHECK(std::abs(round.at(y, x) - img.at(y, x)) <= 0.02);
  }
}

TEST_CASE("alpha_composite endpoints and blend") {
  Image fg(3, 3, 1.f), bg(3, 3, 0.f);
  Image a1(3, 3, 1.f), a0(3, 3, 0.f), ah(3, 3, 0.5f);
  for (float v : alpha_composite(fg, a1, bg).pixels) CHECK(v == doctest::Approx(1.0));
  for (float v : alpha_composite(fg, a0, bg).pixels) CHECK(v == doctest::Approx(0.0));
  for (float v : alpha_composite(fg, ah, bg).pixels) CHECK(v == doctest::Approx(0.5));
  CHECK_THROWS_AS(alpha_composite(fg, a1, Image(2, 3)), Error);
}

TEST_CASE("alpha_composite bounded by min/max of layers") {
  Rng rng(3);
  Image fg(6, 6), bg(6, 6), a(6, 6);
  for (int it = 0; it < 20; ++it) {
    for (float& v : fg.pixels) v = static_cast<float>(rng.next_double());
    for (float& v : bg.pixels) v = static_cast<float>(rng.next_double());
    for (float& v : a.pixels) v = static_cast<float>(rng.next_double());
    Image out = alpha_composite(fg, a, bg);
    for (size_t i = 0; i < out.pixels.size(); ++i) {
      CHECK(out.pixels[i] >= std::min(fg.pixels[i], bg.pixels[i]) - 1e-6f);
      CHECK(out.pixels[i] <= std::max(fg.pixels[i], bg.pixels[i]) + 1e-6f);
    }
  }
}

TEST_CASE("ops are pure") {
  Image img = smooth_test_image(20, 30);
  std::array<double, 8> off = {1, -1, 0.5, 0.2, -0.7, 1.1, 0, -0.4};
  Homography h = Homography::from_corner_offsets(img.width, img.height, off);
  Image a = warp_perspective(img, h, 0.f);
  Image b = warp_perspective(img, h, 0.f);
  CHECK(a.pixels == b.pixels);
  CHECK(resize_fixed_height(img, 13).pixels == resize_fixed_height(img, 13).pixels);
}
