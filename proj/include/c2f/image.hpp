#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

// Interleaved 8-bit RGB raster.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3
};

enum class ImageFormat { png, jpeg, ppm, unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);

// PNG, JPEG and binary PPM (P6). Throws DataError on undecodable or empty images.
RgbImage decode_rgb(std::span<const std::uint8_t> bytes);

// Bilinear resize (half-pixel centers, edge clamp) to [3,size,size], scaled to [0,1].
Tensor to_tensor(const RgbImage& image, std::size_t size);

Tensor decode_image(std::span<const std::uint8_t> bytes, std::size_t size = 128);
Tensor load_image(const std::filesystem::path& path, std::size_t size = 128);

std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality = 95);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace c2f
