#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace medrag {

/// Decoded grayscale bitmap, values in [0, 255].
struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<double> gray;  // row-major, width*height

    double at(int x, int y) const { return gray[static_cast<std::size_t>(y) * width + x]; }
};

/// Decodes a PNM image (P2/P3/P5/P6). Color planes are collapsed to
/// luma 0.299r + 0.587g + 0.114b, scaled to [0, 255] regardless of maxval.
/// Throws InputError on anything undecodable.
Bitmap decode_image_bytes(std::string_view bytes);
Bitmap decode_image(const std::filesystem::path& path);

/// 64-bit difference hash: box-average the bitmap onto a 9x8 grid and set
/// bit y*8+x when cell (x,y) is strictly brighter than cell (x+1,y).
std::uint64_t perceptual_hash(const Bitmap& bitmap);

int hamming_distance(std::uint64_t a, std::uint64_t b);

// Writers used by fixtures and tests.
std::string encode_pgm(int width, int height, const std::vector<std::uint8_t>& pixels);
std::string encode_ppm(int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace medrag
