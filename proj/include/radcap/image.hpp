#ifndef RADCAP_IMAGE_HPP
#define RADCAP_IMAGE_HPP

#include <filesystem>
#include <vector>

namespace radcap {

// Grayscale raster, intensities in [0,1], row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0);

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    bool operator==(const GrayImage& other) const = default;
};

// Same layout, but values are signed and unclamped (Laplacian output,
// intermediate products).
struct SignedImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    SignedImage() = default;
    SignedImage(int w, int h, double fill = 0.0);

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

// Square convolution kernel, odd size.
struct Kernel {
    int size = 0;
    std::vector<double> weights;  // size * size

    double at(int i, int j) const { return weights[static_cast<size_t>(i) * size + j]; }
};

// Unnormalized 2-D Gaussian sample at integer offset (x, y).
double gaussian2d(int x, int y, double sigma);

// Kernel of size 2*ceil(3*sigma)+1, weights normalized to sum 1.
// Rejects sigma <= 0.
Kernel build_gaussian_kernel(double sigma);

// Cross-correlation with replicated borders, output clamped to [0,1].
// All kernels used through this entry point are symmetric, so the
// orientation convention does not matter.
GrayImage convolve2d(const GrayImage& img, const Kernel& k);

// 4-neighbor Laplacian [[0,1,0],[1,-4,1],[0,1,0]], replicated borders,
// output signed and unclamped.
SignedImage laplacian(const GrayImage& img);

// 3x3 Sobel gradient magnitude sqrt(Gx^2+Gy^2), clamped to [0,1].
GrayImage sobel_magnitude(const GrayImage& img);

// Uniform 3x3 kernel of weight 1/9.
GrayImage mean_filter3(const GrayImage& img);

// 256-bin histogram equalization with the (cdf - cdf_min)/(total - cdf_min)
// mapping. A constant image comes back unchanged.
GrayImage histogram_equalize(const GrayImage& img);

// Six-step enhancement: Laplacian, Sobel magnitude, 3x3 mean of the Sobel
// mask, pixel-wise product of mask and Laplacian, addition back onto the
// input (clamped), histogram equalization.
GrayImage enhance(const GrayImage& img);

// Gaussian smoothing: convolve2d(img, build_gaussian_kernel(sigma)).
GrayImage denoise(const GrayImage& img, double sigma);

double image_variance(const GrayImage& img);

// Binary PGM (P5), maxval 255. Pixel v in [0,1] maps to byte round(v*255).
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

}  // namespace radcap

#endif
