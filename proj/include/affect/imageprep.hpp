#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace affect {

// Row-major interleaved RGB, one byte per channel.
struct PixelImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
};

// HSV planes of one image. Hue uses half-degree units [0, 179] like the
// common 8-bit convention but is kept real-valued so that converting back to
// RGB only pays the S/V quantization; saturation and value are bytes.
struct HsvPlanes {
    int width = 0;
    int height = 0;
    std::vector<double> hue;
    std::vector<std::uint8_t> sat;
    std::vector<std::uint8_t> val;
};

struct ColorCorrectionConfig {
    int fixed_hue = 14;                    // half-degrees, [0, 179]
    double target_saturation_mean = 128.0; // [0, 255]
    double target_value_mean = 128.0;      // [0, 255]
    double clahe_clip_limit = 2.0;
    int clahe_tiles_x = 8;
    int clahe_tiles_y = 8;

    void validate() const {
        if (fixed_hue < 0 || fixed_hue > 179) {
            throw std::invalid_argument("color config: fixed_hue must be in [0, 179]");
        }
        if (target_saturation_mean < 0.0 || target_saturation_mean > 255.0 ||
            target_value_mean < 0.0 || target_value_mean > 255.0) {
            throw std::invalid_argument("color config: target means must be in [0, 255]");
        }
        if (!(clahe_clip_limit > 0.0)) {
            throw std::invalid_argument("color config: clip limit must be positive");
        }
        if (clahe_tiles_x < 1 || clahe_tiles_y < 1) {
            throw std::invalid_argument("color config: tile grid must be positive");
        }
    }
};

namespace detail {

inline std::uint8_t clamp_byte(double v) {
    long r = std::lround(v);
    if (r < 0) {
        r = 0;
    }
    if (r > 255) {
        r = 255;
    }
    return static_cast<std::uint8_t>(r);
}

}  // namespace detail

inline void validate_image(const PixelImage& img) {
    if (img.width <= 0 || img.height <= 0) {
        throw std::invalid_argument("image: dimensions must be positive");
    }
    if (img.pixels.size() != img.pixel_count() * 3) {
        throw std::invalid_argument("image: pixel buffer size does not match dimensions");
    }
}

// Standard RGB -> HSV. Hue is exact (no quantization); S is rounded to a
// byte; V is the exact channel maximum. Achromatic pixels get hue 0.
inline HsvPlanes rgb_to_hsv(const PixelImage& img) {
    validate_image(img);
    HsvPlanes out;
    out.width = img.width;
    out.height = img.height;
    const std::size_t n = img.pixel_count();
    out.hue.resize(n);
    out.sat.resize(n);
    out.val.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int r = img.pixels[3 * i];
        const int g = img.pixels[3 * i + 1];
        const int b = img.pixels[3 * i + 2];
        const int v = std::max({r, g, b});
        const int mn = std::min({r, g, b});
        const int delta = v - mn;
        out.val[i] = static_cast<std::uint8_t>(v);
        if (v == 0 || delta == 0) {
            out.sat[i] = 0;
            out.hue[i] = 0.0;
            continue;
        }
        out.sat[i] = detail::clamp_byte(255.0 * delta / v);
        double h;
        if (v == r) {
            h = 60.0 * (g - b) / delta;
        } else if (v == g) {
            h = 120.0 + 60.0 * (b - r) / delta;
        } else {
            h = 240.0 + 60.0 * (r - g) / delta;
        }
        if (h < 0.0) {
            h += 360.0;
        }
        out.hue[i] = h / 2.0;
    }
    return out;
}

inline PixelImage hsv_to_rgb(const HsvPlanes& hsv) {
    const std::size_t n = hsv.hue.size();
    if (hsv.sat.size() != n || hsv.val.size() != n ||
        n != static_cast<std::size_t>(hsv.width) * static_cast<std::size_t>(hsv.height)) {
        throw std::invalid_argument("hsv planes: inconsistent sizes");
    }
    PixelImage img;
    img.width = hsv.width;
    img.height = hsv.height;
    img.pixels.resize(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = hsv.val[i];
        const double s = hsv.sat[i];
        if (s == 0.0) {
            const std::uint8_t b = static_cast<std::uint8_t>(hsv.val[i]);
            img.pixels[3 * i] = b;
            img.pixels[3 * i + 1] = b;
            img.pixels[3 * i + 2] = b;
            continue;
        }
        double h_deg = hsv.hue[i] * 2.0;
        h_deg = std::fmod(h_deg, 360.0);
        if (h_deg < 0.0) {
            h_deg += 360.0;
        }
        const double c = v * s / 255.0;
        const int sector = static_cast<int>(h_deg / 60.0) % 6;
        const double f = h_deg / 60.0 - std::floor(h_deg / 60.0);
        const double p = v - c;
        const double q = v - c * f;
        const double t = v - c * (1.0 - f);
        double r, g, b;
        switch (sector) {
            case 0: r = v; g = t; b = p; break;
            case 1: r = q; g = v; b = p; break;
            case 2: r = p; g = v; b = t; break;
            case 3: r = p; g = q; b = v; break;
            case 4: r = t; g = p; b = v; break;
            default: r = v; g = p; b = q; break;
        }
        img.pixels[3 * i] = detail::clamp_byte(r);
        img.pixels[3 * i + 1] = detail::clamp_byte(g);
        img.pixels[3 * i + 2] = detail::clamp_byte(b);
    }
    return img;
}

// Shift every pixel by (target_mean - plane mean), clamp to [0, 255], round.
inline std::vector<std::uint8_t> offset_channel_to_mean(const std::vector<std::uint8_t>& plane,
                                                        double target_mean) {
    if (plane.empty()) {
        throw std::invalid_argument("offset_channel_to_mean: empty plane");
    }
    double sum = 0.0;
    for (std::uint8_t p : plane) {
        sum += p;
    }
    const double shift = target_mean - sum / static_cast<double>(plane.size());
    std::vector<std::uint8_t> out(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        out[i] = detail::clamp_byte(plane[i] + shift);
    }
    return out;
}

// Contrast-limited adaptive histogram equalization.
//
// The plane is split into a tiles_x x tiles_y grid (tile i spans pixel
// columns [i*W/tiles_x, (i+1)*W/tiles_x)). Each tile's 256-bin histogram is
// clipped at exactly clip_limit * tile_pixels / 256 and the clipped excess is
// redistributed uniformly, excess/256 to every bin (fractional counts; one
// pass, no re-clip). The tile mapping is the mid-bin equalization
// map[v] = round(255 * (cdf[v] - hist[v]/2) / tile_pixels), whose output mean
// is 127.5 for any input distribution, and every output pixel bilinearly
// blends the mappings of the four tiles whose centers surround it.
inline std::vector<std::uint8_t> clahe(const std::vector<std::uint8_t>& plane, int width,
                                       int height, double clip_limit, int tiles_x, int tiles_y) {
    if (width <= 0 || height <= 0 ||
        plane.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw std::invalid_argument("clahe: plane size does not match dimensions");
    }
    if (!(clip_limit > 0.0)) {
        throw std::invalid_argument("clahe: clip limit must be positive");
    }
    if (tiles_x < 1 || tiles_y < 1 || tiles_x > width || tiles_y > height) {
        throw std::invalid_argument("clahe: tile grid " + std::to_string(tiles_x) + "x" +
                                    std::to_string(tiles_y) + " does not fit image " +
                                    std::to_string(width) + "x" + std::to_string(height));
    }

    std::vector<int> xs(tiles_x + 1);
    std::vector<int> ys(tiles_y + 1);
    for (int i = 0; i <= tiles_x; ++i) {
        xs[i] = static_cast<int>(static_cast<long>(i) * width / tiles_x);
    }
    for (int j = 0; j <= tiles_y; ++j) {
        ys[j] = static_cast<int>(static_cast<long>(j) * height / tiles_y);
    }

    // Per-tile equalization mappings.
    std::vector<std::array<std::uint8_t, 256>> maps(
        static_cast<std::size_t>(tiles_x) * static_cast<std::size_t>(tiles_y));
    for (int tj = 0; tj < tiles_y; ++tj) {
        for (int ti = 0; ti < tiles_x; ++ti) {
            double hist[256] = {0.0};
            const long area = static_cast<long>(xs[ti + 1] - xs[ti]) * (ys[tj + 1] - ys[tj]);
            for (int y = ys[tj]; y < ys[tj + 1]; ++y) {
                for (int x = xs[ti]; x < xs[ti + 1]; ++x) {
                    hist[plane[static_cast<std::size_t>(y) * width + x]] += 1.0;
                }
            }
            const double limit = clip_limit * static_cast<double>(area) / 256.0;
            if (limit < static_cast<double>(area)) {
                double excess = 0.0;
                for (double& h : hist) {
                    if (h > limit) {
                        excess += h - limit;
                        h = limit;
                    }
                }
                const double add = excess / 256.0;
                for (double& h : hist) {
                    h += add;
                }
            }
            auto& map = maps[static_cast<std::size_t>(tj) * tiles_x + ti];
            double cdf = 0.0;
            for (int b = 0; b < 256; ++b) {
                cdf += hist[b];
                map[b] = detail::clamp_byte(255.0 * (cdf - hist[b] / 2.0) /
                                            static_cast<double>(area));
            }
        }
    }

    std::vector<double> cx(tiles_x);
    std::vector<double> cy(tiles_y);
    for (int i = 0; i < tiles_x; ++i) {
        cx[i] = (xs[i] + xs[i + 1] - 1) / 2.0;
    }
    for (int j = 0; j < tiles_y; ++j) {
        cy[j] = (ys[j] + ys[j + 1] - 1) / 2.0;
    }

    auto locate = [](const std::vector<double>& centers, int pos, int& lo, int& hi, double& f) {
        const int last = static_cast<int>(centers.size()) - 1;
        if (pos <= centers[0]) {
            lo = hi = 0;
            f = 0.0;
            return;
        }
        if (pos >= centers[last]) {
            lo = hi = last;
            f = 0.0;
            return;
        }
        hi = 1;
        while (hi < last && centers[hi] < pos) {
            ++hi;
        }
        lo = hi - 1;
        f = (pos - centers[lo]) / (centers[hi] - centers[lo]);
    };

    std::vector<std::uint8_t> out(plane.size());
    for (int y = 0; y < height; ++y) {
        int j0, j1;
        double fy;
        locate(cy, y, j0, j1, fy);
        for (int x = 0; x < width; ++x) {
            int i0, i1;
            double fx;
            locate(cx, x, i0, i1, fx);
            const std::uint8_t v = plane[static_cast<std::size_t>(y) * width + x];
            const double m00 = maps[static_cast<std::size_t>(j0) * tiles_x + i0][v];
            const double m01 = maps[static_cast<std::size_t>(j0) * tiles_x + i1][v];
            const double m10 = maps[static_cast<std::size_t>(j1) * tiles_x + i0][v];
            const double m11 = maps[static_cast<std::size_t>(j1) * tiles_x + i1][v];
            const double blended =
                (1.0 - fy) * ((1.0 - fx) * m00 + fx * m01) + fy * ((1.0 - fx) * m10 + fx * m11);
            out[static_cast<std::size_t>(y) * width + x] = detail::clamp_byte(blended);
        }
    }
    return out;
}

// Full tone correction: fixed hue, saturation offset to its target mean,
// value offset to its target mean followed by CLAHE.
inline PixelImage correct_color(const PixelImage& img, const ColorCorrectionConfig& cfg) {
    cfg.validate();
    HsvPlanes hsv = rgb_to_hsv(img);
    std::fill(hsv.hue.begin(), hsv.hue.end(), static_cast<double>(cfg.fixed_hue));
    hsv.sat = offset_channel_to_mean(hsv.sat, cfg.target_saturation_mean);
    hsv.val = offset_channel_to_mean(hsv.val, cfg.target_value_mean);
    hsv.val = clahe(hsv.val, hsv.width, hsv.height, cfg.clahe_clip_limit, cfg.clahe_tiles_x,
                    cfg.clahe_tiles_y);
    return hsv_to_rgb(hsv);
}

// --- binary PPM (P6) I/O -----------------------------------------------

namespace detail {

inline int ppm_read_token(std::istream& in, const std::string& path) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') {
                c = in.get();
            }
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) {
        throw std::runtime_error(path + ": malformed PPM header");
    }
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    if (c != EOF) {
        in.unget();
    }
    return value;
}

}  // namespace detail

inline PixelImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6') {
        throw std::runtime_error(path + ": not a binary PPM (P6) file");
    }
    PixelImage img;
    img.width = detail::ppm_read_token(in, path);
    img.height = detail::ppm_read_token(in, path);
    const int maxval = detail::ppm_read_token(in, path);
    if (maxval != 255) {
        throw std::runtime_error(path + ": unsupported maxval " + std::to_string(maxval));
    }
    in.get();  // single whitespace after maxval
    if (img.width <= 0 || img.height <= 0) {
        throw std::runtime_error(path + ": invalid dimensions");
    }
    img.pixels.resize(img.pixel_count() * 3);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
        throw std::runtime_error(path + ": truncated pixel data");
    }
    return img;
}

inline void write_ppm(const std::string& path, const PixelImage& img) {
    validate_image(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) {
        throw std::runtime_error(path + ": write failed");
    }
}

}  // namespace affect
