#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "radcap/image.hpp"
#include "radcap/tensor.hpp"

using namespace radcap;

namespace {

GrayImage random_image(int w, int h, uint64_t seed) {
    std::mt19937_64 rng(seed);
    GrayImage img(w, h);
    for (double& p : img.pixels) p = uniform01(rng);
    return img;
}

GrayImage checkerboard(int w, int h) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = ((x + y) % 2 == 0) ? 1.0 : 0.0;
    return img;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("gaussian kernel weights sum to one") {
    for (double sigma : {0.5, 1.0, 2.0, 5.0}) {
        Kernel k = build_gaussian_kernel(sigma);
        double sum = 0.0;
        for (double w : k.weights) sum += w;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(k.size == 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1);
        CHECK(k.size % 2 == 1);
    }
}

TEST_CASE("unnormalized gaussian center for sigma 1 is 1/(2pi)") {
    CHECK(std::abs(gaussian2d(0, 0, 1.0) - 1.0 / (2.0 * std::numbers::pi)) < 1e-12);
    CHECK(gaussian2d(0, 0, 1.0) == doctest::Approx(0.159155).epsilon(1e-5));
}

TEST_CASE("gaussian kernel is symmetric") {
    Kernel k = build_gaussian_kernel(1.3);
    for (int i = 0; i < k.size; ++i) {
        for (int j = 0; j < k.size; ++j) {
            CHECK(k.at(i, j) == k.at(j, i));
            CHECK(k.at(i, j) == k.at(k.size - 1 - i, j));
        }
    }
}

TEST_CASE("gaussian kernel rejects non-positive sigma") {
    CHECK_THROWS_AS(build_gaussian_kernel(0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_gaussian_kernel(-1.0), std::invalid_argument);
}

TEST_CASE("convolution of constant image with normalized kernel is the constant") {
    GrayImage img(9, 7, 0.42);
    GrayImage out = convolve2d(img, build_gaussian_kernel(1.0));
    CHECK(out.width == 9);
    CHECK(out.height == 7);
    for (double v : out.pixels) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("convolution of centered delta reproduces kernel weights") {
    Kernel k = build_gaussian_kernel(0.5);  // 5x5
    GrayImage img(15, 15, 0.0);
    img.at(7, 7) = 1.0;
    GrayImage out = convolve2d(img, k);
    const int r = k.size / 2;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            CHECK(out.at(7 + dx, 7 + dy) ==
                  doctest::Approx(k.at(r + dy, r + dx)).epsilon(1e-12));
    CHECK(out.at(0, 0) == 0.0);
}

TEST_CASE("3x3 mean kernel on 3x3 ramp gives the mean at the center") {
    GrayImage img(3, 3);
    double sum = 0.0;
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
            img.at(x, y) = (y * 3 + x) / 10.0;
            sum += img.at(x, y);
        }
    GrayImage out = mean_filter3(img);
    CHECK(out.at(1, 1) == doctest::Approx(sum / 9.0).epsilon(1e-12));
}

TEST_CASE("laplacian of constant image is zero") {
    SignedImage out = laplacian(GrayImage(8, 8, 0.3));
    for (double v : out.pixels) CHECK(v == 0.0);
}

TEST_CASE("laplacian of linear ramp vanishes in the interior") {
    GrayImage img(12, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 12; ++x) img.at(x, y) = x / 20.0 + y / 30.0;
    SignedImage out = laplacian(img);
    for (int y = 1; y < 5; ++y)
        for (int x = 1; x < 11; ++x) CHECK(std::abs(out.at(x, y)) < 1e-12);
}

TEST_CASE("laplacian of a delta is -4 with +1 neighbors, unclamped") {
    GrayImage img(9, 9, 0.0);
    img.at(4, 4) = 1.0;
    SignedImage out = laplacian(img);
    CHECK(out.at(4, 4) == doctest::Approx(-4.0).epsilon(1e-15));
    CHECK(out.at(3, 4) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.at(5, 4) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.at(4, 3) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.at(4, 5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.at(0, 0) == 0.0);
}

TEST_CASE("sobel magnitude of constant image is zero") {
    GrayImage out = sobel_magnitude(GrayImage(6, 6, 0.9));
    for (double v : out.pixels) CHECK(v == 0.0);
}

TEST_CASE("sobel responds equally to vertical and horizontal step edges") {
    const double h = 0.25;  // keep |G| below the clamp so magnitudes are comparable
    GrayImage vert(10, 10), horiz(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
            vert.at(x, y) = x >= 5 ? h : 0.0;
            horiz.at(x, y) = y >= 5 ? h : 0.0;
        }
    GrayImage mv = sobel_magnitude(vert);
    GrayImage mh = sobel_magnitude(horiz);
    for (int i = 2; i < 8; ++i)
        CHECK(mv.at(5, i) == doctest::Approx(mh.at(i, 5)).epsilon(1e-12));
}

TEST_CASE("sobel on a unit step edge saturates to 1") {
    // |Gx| = 4 before the clamp on an interior edge pixel.
    GrayImage img(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) img.at(x, y) = x >= 5 ? 1.0 : 0.0;
    GrayImage out = sobel_magnitude(img);
    CHECK(out.at(5, 5) == 1.0);
    CHECK(out.at(4, 5) == 1.0);
    CHECK(out.at(2, 5) == 0.0);
}

TEST_CASE("mean filter of a delta spreads 1/9 over its neighborhood") {
    GrayImage img(9, 9, 0.0);
    img.at(4, 4) = 1.0;
    GrayImage out = mean_filter3(img);
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            CHECK(out.at(4 + dx, 4 + dy) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(out.at(1, 1) == 0.0);
}

TEST_CASE("mean filter of a two-pixel stripe matches a brute-force oracle") {
    GrayImage img(8, 5, 0.0);
    for (int y = 0; y < 5; ++y) {
        img.at(3, y) = 1.0;
        img.at(4, y) = 1.0;
    }
    GrayImage out = mean_filter3(img);
    // independent recomputation with explicit clamped indexing
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int sx = std::clamp(x + dx, 0, 7);
                    int sy = std::clamp(y + dy, 0, 4);
                    acc += img.at(sx, sy) / 9.0;
                }
            CHECK(out.at(x, y) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
    CHECK(out.at(3, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(out.at(2, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("histogram equalization of constant image is the identity") {
    GrayImage img(7, 4, 0.6);
    CHECK(histogram_equalize(img) == img);
}

TEST_CASE("histogram equalization leaves a uniform histogram nearly unchanged") {
    GrayImage img(16, 16);
    for (int i = 0; i < 256; ++i) img.pixels[static_cast<size_t>(i)] = i / 255.0;
    GrayImage out = histogram_equalize(img);
    for (int i = 0; i < 256; ++i)
        CHECK(std::abs(out.pixels[static_cast<size_t>(i)] - img.pixels[static_cast<size_t>(i)]) <=
              1.0 / 255.0 + 1e-12);
}

TEST_CASE("histogram equalization stretches a two-level image to full range") {
    GrayImage img(4, 4);
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = i < 4 ? 0.2 : 0.8;
    GrayImage out = histogram_equalize(img);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(out.pixels[i] == doctest::Approx(i < 4 ? 0.0 : 1.0).epsilon(1e-12));
}

TEST_CASE("histogram equalization mapping is monotone") {
    GrayImage img = random_image(32, 32, 99);
    GrayImage out = histogram_equalize(img);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        for (size_t j = 0; j < img.pixels.size(); j += 37)
            if (img.pixels[i] <= img.pixels[j]) CHECK(out.pixels[i] <= out.pixels[j] + 1e-15);
}

TEST_CASE("enhance keeps a constant image fixed") {
    GrayImage img(16, 16, 0.5);
    CHECK(enhance(img) == img);
}

TEST_CASE("enhance output stays in range and preserves dimensions") {
    GrayImage img = random_image(24, 17, 123);
    GrayImage out = enhance(img);
    CHECK(out.width == img.width);
    CHECK(out.height == img.height);
    for (double v : out.pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("enhance is deterministic") {
    GrayImage img = random_image(20, 20, 5);
    CHECK(enhance(img) == enhance(img));
}

TEST_CASE("enhance equals the composition of its six stages") {
    GrayImage img = checkerboard(16, 16);
    SignedImage lap = laplacian(img);
    GrayImage mask = mean_filter3(sobel_magnitude(img));
    GrayImage sharpened(img.width, img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        sharpened.pixels[i] = std::clamp(img.pixels[i] + mask.pixels[i] * lap.pixels[i], 0.0, 1.0);
    GrayImage expected = histogram_equalize(sharpened);
    CHECK(enhance(img) == expected);
}

TEST_CASE("denoise keeps a constant image constant") {
    GrayImage img(10, 10, 0.7);
    GrayImage out = denoise(img, 1.5);
    for (double v : out.pixels) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("larger sigma blurs more") {
    GrayImage noisy = random_image(40, 40, 321);
    CHECK(image_variance(denoise(noisy, 2.0)) <= image_variance(denoise(noisy, 1.0)));
}

TEST_CASE("denoise of a delta puts the kernel center at the delta") {
    Kernel k = build_gaussian_kernel(1.0);
    GrayImage img(21, 21, 0.0);
    img.at(10, 10) = 1.0;
    GrayImage out = denoise(img, 1.0);
    CHECK(out.at(10, 10) == doctest::Approx(k.at(k.size / 2, k.size / 2)).epsilon(1e-12));
}

TEST_CASE("pipeline stages preserve dimensions") {
    GrayImage img = random_image(13, 9, 77);
    CHECK(denoise(img, 1.0).width == 13);
    CHECK(denoise(img, 1.0).height == 9);
    CHECK(sobel_magnitude(img).width == 13);
    CHECK(mean_filter3(img).height == 9);
    CHECK(histogram_equalize(img).width == 13);
    SignedImage lap = laplacian(img);
    CHECK(lap.width == 13);
    CHECK(lap.height == 9);
}

TEST_CASE("pgm round trip is exact after quantization") {
    const auto path = std::filesystem::temp_directory_path() / "radcap_test_roundtrip.pgm";
    GrayImage img(5, 3);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<double>(i * 17 % 256) / 255.0;
    write_pgm(img, path);
    GrayImage back = read_pgm(path);
    CHECK(back == img);
    // a second write of the loaded image must be byte-identical
    const auto path2 = std::filesystem::temp_directory_path() / "radcap_test_roundtrip2.pgm";
    write_pgm(back, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("pgm reader rejects malformed files") {
    const auto path = std::filesystem::temp_directory_path() / "radcap_test_bad.pgm";
    {
        std::ofstream out(path, std::ios::binary);
        out << "P6\n2 2\n255\nabcd";
    }
    CHECK_THROWS_AS(read_pgm(path), std::runtime_error);
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n2 2\n255\nab";  // truncated
    }
    CHECK_THROWS_AS(read_pgm(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("pgm reader handles comments") {
    const auto path = std::filesystem::temp_directory_path() / "radcap_test_comment.pgm";
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n# a comment\n2 1\n255\n";
        out.put(static_cast<char>(0));
        out.put(static_cast<char>(255));
    }
    GrayImage img = read_pgm(path);
    CHECK(img.width == 2);
    CHECK(img.height == 1);
    CHECK(img.at(0, 0) == 0.0);
    CHECK(img.at(1, 0) == 1.0);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
