#include "medrag/image.hpp"

#include <bit>
#include <cctype>
#include <sstream>

#include "medrag/errors.hpp"
#include "medrag/util.hpp"

namespace medrag {

namespace {

// Token scanner over PNM header/ASCII payloads; '#' starts a comment.
class PnmScanner {
public:
    explicit PnmScanner(std::string_view data) : data_(data) {}

    std::string next_token() {
        skip_separators();
        if (pos_ >= data_.size()) throw InputError("pnm: truncated header");
        std::string tok;
        while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
            tok.push_back(data_[pos_++]);
        }
        return tok;
    }

    long next_int() {
        const std::string tok = next_token();
        try {
            return std::stol(tok);
        } catch (...) {
            throw InputError("pnm: expected integer, got '" + tok + "'");
        }
    }

    // Position of the binary payload: exactly one whitespace byte after maxval.
    std::size_t binary_start() {
        if (pos_ >= data_.size()) throw InputError("pnm: missing payload");
        ++pos_;
        return pos_;
    }

private:
    void skip_separators() {
        while (pos_ < data_.size()) {
            const char c = data_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

}  // namespace

Bitmap decode_image_bytes(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P') throw InputError("image: not a PNM file");
    const char kind = bytes[1];
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
        throw InputError("image: unsupported PNM variant P" + std::string(1, kind));
    }
    PnmScanner scan(bytes.substr(2));
    const long w = scan.next_int();
    const long h = scan.next_int();
    const long maxval = scan.next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
        throw InputError("image: bad PNM dimensions");
    }
    const bool color = (kind == '3' || kind == '6');
    const std::size_t samples = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                                (color ? 3 : 1);
    const double scale = 255.0 / static_cast<double>(maxval);

    std::vector<double> raw;
    raw.reserve(samples);
    if (kind == '2' || kind == '3') {
        for (std::size_t i = 0; i < samples; ++i) {
            const long v = scan.next_int();
            if (v < 0 || v > maxval) throw InputError("image: sample out of range");
            raw.push_back(static_cast<double>(v) * scale);
        }
    } else {
        const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
        const std::size_t start = 2 + scan.binary_start();
        if (bytes.size() < start + samples * bytes_per_sample) {
            throw InputError("image: truncated PNM payload");
        }
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + start;
        for (std::size_t i = 0; i < samples; ++i) {
            long v;
            if (bytes_per_sample == 2) {
                v = (static_cast<long>(p[2 * i]) << 8) | p[2 * i + 1];
            } else {
                v = p[i];
            }
            raw.push_back(static_cast<double>(v) * scale);
        }
    }

    Bitmap bmp;
    bmp.width = static_cast<int>(w);
    bmp.height = static_cast<int>(h);
    bmp.gray.reserve(static_cast<std::size_t>(w) * h);
    if (color) {
        for (std::size_t i = 0; i + 2 < raw.size(); i += 3) {
            bmp.gray.push_back(luma(raw[i], raw[i + 1], raw[i + 2]));
        }
    } else {
        bmp.gray = std::move(raw);
    }
    return bmp;
}

Bitmap decode_image(const std::filesystem::path& path) {
    return decode_image_bytes(read_file(path));
}

std::uint64_t perceptual_hash(const Bitmap& bitmap) {
    if (bitmap.width <= 0 || bitmap.height <= 0 || bitmap.gray.empty()) {
        throw InputError("perceptual_hash: empty bitmap");
    }
    constexpr int kCols = 9;
    constexpr int kRows = 8;

    // Box-average downsample. Cell boundaries at floor(i*dim/grid); degenerate
    // ranges are widened to one pixel so tiny images still hash. Because
    // floor(g*dim/grid) < dim for g < grid, cell starts are always in range.
    double cells[kRows][kCols];
    for (int gy = 0; gy < kRows; ++gy) {
        const int y0 = gy * bitmap.height / kRows;
        int y1 = (gy + 1) * bitmap.height / kRows;
        if (y1 <= y0) y1 = y0 + 1;
        for (int gx = 0; gx < kCols; ++gx) {
            const int x0 = gx * bitmap.width / kCols;
            int x1 = (gx + 1) * bitmap.width / kCols;
            if (x1 <= x0) x1 = x0 + 1;
            double sum = 0.0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) sum += bitmap.at(x, y);
            }
            cells[gy][gx] = sum / ((y1 - y0) * (x1 - x0));
        }
    }

    std::uint64_t hash = 0;
    for (int gy = 0; gy < kRows; ++gy) {
        for (int gx = 0; gx < kCols - 1; ++gx) {
            if (cells[gy][gx] > cells[gy][gx + 1]) {
                hash |= std::uint64_t{1} << (gy * 8 + gx);
            }
        }
    }
    return hash;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) {
    return std::popcount(a ^ b);
}

std::string encode_pgm(int width, int height, const std::vector<std::uint8_t>& pixels) {
    if (pixels.size() != static_cast<std::size_t>(width) * height) {
        throw ParameterError("encode_pgm: pixel count mismatch");
    }
    std::ostringstream out;
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    return out.str();
}

std::string encode_ppm(int width, int height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
        throw ParameterError("encode_ppm: pixel count mismatch");
    }
    std::ostringstream out;
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()),
              static_cast<std::streamsize>(rgb.size()));
    return out.str();
}

}  // namespace medrag
