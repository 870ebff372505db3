#include "radcap/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace radcap {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void require_non_empty(const GrayImage& img, const char* op) {
    if (img.width < 1 || img.height < 1)
        throw std::invalid_argument(std::string(op) + ": image must be non-empty");
}

}  // namespace

GrayImage::GrayImage(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {
    if (w < 0 || h < 0) throw std::invalid_argument("image dimensions must be non-negative");
}

SignedImage::SignedImage(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {}

double gaussian2d(int x, int y, double sigma) {
    const double s2 = sigma * sigma;
    return 1.0 / (2.0 * kPi * s2) * std::exp(-(x * x + y * y) / (2.0 * s2));
}

Kernel build_gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel requires sigma > 0");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    Kernel k;
    k.size = 2 * radius + 1;
    k.weights.resize(static_cast<size_t>(k.size) * k.size);
    double sum = 0.0;
    for (int i = 0; i < k.size; ++i) {
        for (int j = 0; j < k.size; ++j) {
            const double w = gaussian2d(j - radius, i - radius, sigma);
            k.weights[static_cast<size_t>(i) * k.size + j] = w;
            sum += w;
        }
    }
    for (double& w : k.weights) w /= sum;
    return k;
}

GrayImage convolve2d(const GrayImage& img, const Kernel& k) {
    require_non_empty(img, "convolve2d");
    if (k.size < 1 || k.size % 2 == 0) throw std::invalid_argument("kernel size must be odd");
    const int r = k.size / 2;
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                const int sy = clampi(y + i, 0, img.height - 1);
                for (int j = -r; j <= r; ++j) {
                    const int sx = clampi(x + j, 0, img.width - 1);
                    acc += k.at(i + r, j + r) * img.at(sx, sy);
                }
            }
            out.at(x, y) = clamp01(acc);
        }
    }
    return out;
}

SignedImage laplacian(const GrayImage& img) {
    require_non_empty(img, "laplacian");
    SignedImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double c = img.at(x, y);
            const double up = img.at(x, clampi(y - 1, 0, img.height - 1));
            const double down = img.at(x, clampi(y + 1, 0, img.height - 1));
            const double left = img.at(clampi(x - 1, 0, img.width - 1), y);
            const double right = img.at(clampi(x + 1, 0, img.width - 1), y);
            // paired differences so constant regions give exactly zero
            out.at(x, y) = (up - c) + (down - c) + (left - c) + (right - c);
        }
    }
    return out;
}

GrayImage sobel_magnitude(const GrayImage& img) {
    require_non_empty(img, "sobel_magnitude");
    // Gx = [-1 0 1; -2 0 2; -1 0 1], Gy its transpose; written as paired
    // differences so flat regions give exactly zero.
    GrayImage out(img.width, img.height);
    auto px = [&](int x, int y) {
        return img.at(clampi(x, 0, img.width - 1), clampi(y, 0, img.height - 1));
    };
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double gx = (px(x + 1, y - 1) - px(x - 1, y - 1)) +
                              2.0 * (px(x + 1, y) - px(x - 1, y)) +
                              (px(x + 1, y + 1) - px(x - 1, y + 1));
            const double gy = (px(x - 1, y + 1) - px(x - 1, y - 1)) +
                              2.0 * (px(x, y + 1) - px(x, y - 1)) +
                              (px(x + 1, y + 1) - px(x + 1, y - 1));
            out.at(x, y) = clamp01(std::sqrt(gx * gx + gy * gy));
        }
    }
    return out;
}

GrayImage mean_filter3(const GrayImage& img) {
    Kernel k;
    k.size = 3;
    k.weights.assign(9, 1.0 / 9.0);
    return convolve2d(img, k);
}

GrayImage histogram_equalize(const GrayImage& img) {
    require_non_empty(img, "histogram_equalize");
    std::array<int64_t, 256> hist{};
    auto bin_of = [](double v) {
        return clampi(static_cast<int>(std::lround(clamp01(v) * 255.0)), 0, 255);
    };
    for (double v : img.pixels) ++hist[bin_of(v)];

    std::array<int64_t, 256> cdf{};
    int64_t running = 0;
    for (int b = 0; b < 256; ++b) {
        running += hist[b];
        cdf[b] = running;
    }
    const int64_t total = running;
    int64_t cdf_min = 0;
    for (int b = 0; b < 256; ++b) {
        if (hist[b] > 0) {
            cdf_min = cdf[b];
            break;
        }
    }
    if (cdf_min == total) return img;  // single occupied bin, mapping is degenerate

    GrayImage out(img.width, img.height);
    const double denom = static_cast<double>(total - cdf_min);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        const int b = bin_of(img.pixels[i]);
        out.pixels[i] = clamp01(static_cast<double>(cdf[b] - cdf_min) / denom);
    }
    return out;
}

GrayImage enhance(const GrayImage& img) {
    require_non_empty(img, "enhance");
    const SignedImage lap = laplacian(img);
    const GrayImage sobel = sobel_magnitude(img);
    const GrayImage mask = mean_filter3(sobel);
    GrayImage sharpened(img.width, img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        const double product = mask.pixels[i] * lap.pixels[i];  // signed
        sharpened.pixels[i] = clamp01(img.pixels[i] + product);
    }
    return histogram_equalize(sharpened);
}

GrayImage denoise(const GrayImage& img, double sigma) {
    return convolve2d(img, build_gaussian_kernel(sigma));
}

double image_variance(const GrayImage& img) {
    if (img.pixels.empty()) return 0.0;
    double mean = 0.0;
    for (double v : img.pixels) mean += v;
    mean /= static_cast<double>(img.pixels.size());
    double var = 0.0;
    for (double v : img.pixels) var += (v - mean) * (v - mean);
    return var / static_cast<double>(img.pixels.size());
}

namespace {

// Skips whitespace and '#' comments between PGM header fields.
int next_pgm_int(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw std::runtime_error(path + ": malformed PGM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5") throw std::runtime_error(path.string() + ": not a binary PGM (P5) file");
    const int width = next_pgm_int(in, path.string());
    const int height = next_pgm_int(in, path.string());
    const int maxval = next_pgm_int(in, path.string());
    if (width < 1 || height < 1) throw std::runtime_error(path.string() + ": invalid PGM dimensions");
    if (maxval != 255) throw std::runtime_error(path.string() + ": only maxval 255 PGM is supported");
    // next_pgm_int consumed the single whitespace after maxval
    std::vector<uint8_t> raw(static_cast<size_t>(width) * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw std::runtime_error(path.string() + ": truncated PGM pixel data");
    GrayImage img(width, height);
    for (size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
    return img;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    if (img.width < 1 || img.height < 1)
        throw std::invalid_argument("write_pgm: image must be non-empty");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> raw(img.pixels.size());
    for (size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<uint8_t>(clampi(static_cast<int>(std::lround(clamp01(img.pixels[i]) * 255.0)), 0, 255));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace radcap
