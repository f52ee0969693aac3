#include "mixclust/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "mixclust/errors.hpp"

namespace mixclust {

void PixelGrid::validate() const {
    if (width < 1 || height < 1) throw InputError("image must have positive dimensions");
    if (pixels.rows() != static_cast<long>(width) * height || pixels.cols() != 3)
        throw DimensionMismatch("pixel array does not match width*height x 3");
    if ((pixels.array() < 0.0).any() || (pixels.array() > 1.0).any())
        throw InputError("pixel channels must lie in [0,1]");
}

Rgb PixelGrid::at(int x, int y) const {
    const long i = static_cast<long>(y) * width + x;
    return {pixels(i, 0), pixels(i, 1), pixels(i, 2)};
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// next header token of a PPM, skipping whitespace and comments
std::string ppm_token(const std::string& s, std::size_t& pos) {
    while (pos < s.size()) {
        if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t start = pos;
    while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '#') ++pos;
    if (start == pos) throw InputError("truncated PPM header");
    return s.substr(start, pos - start);
}

int ppm_int(const std::string& s, std::size_t& pos, const char* what) {
    const std::string tok = ppm_token(s, pos);
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        tok.size() > 9)
        throw InputError(std::string("bad PPM ") + what + " '" + tok + "'");
    return std::stoi(tok);
}

PixelGrid decode_png(const std::string& bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw InputError(std::string("cannot decode PNG: ") + img.message);
    img.format = PNG_FORMAT_RGBA;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw InputError(std::string("cannot decode PNG: ") + img.message);
    }
    PixelGrid g;
    g.width = static_cast<int>(img.width);
    g.height = static_cast<int>(img.height);
    const long n = static_cast<long>(g.width) * g.height;
    g.pixels.resize(n, 3);
    for (long i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) g.pixels(i, c) = buf[static_cast<std::size_t>(4 * i + c)] / 255.0;
    return g;
}

unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Rgb hsv(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h, 360.0) / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    Rgb rgb{0, 0, 0};
    const int seg = static_cast<int>(hp);
    switch (seg) {
        case 0: rgb = {c, x, 0}; break;
        case 1: rgb = {x, c, 0}; break;
        case 2: rgb = {0, c, x}; break;
        case 3: rgb = {0, x, c}; break;
        case 4: rgb = {x, 0, c}; break;
        default: rgb = {c, 0, x}; break;
    }
    const double m = v - c;
    for (double& ch : rgb) ch += m;
    return rgb;
}

}  // namespace

PixelGrid decode_ppm(const std::string& s) {
    if (s.size() < 2 || s[0] != 'P' || s[1] != '6') throw InputError("not a binary PPM (P6)");
    std::size_t pos = 2;
    PixelGrid g;
    g.width = ppm_int(s, pos, "width");
    g.height = ppm_int(s, pos, "height");
    const int maxval = ppm_int(s, pos, "maxval");
    if (g.width < 1 || g.height < 1) throw InputError("PPM has zero size");
    if (maxval < 1 || maxval > 65535) throw InputError("PPM maxval out of range");
    if (pos >= s.size() || !std::isspace(static_cast<unsigned char>(s[pos])))
        throw InputError("truncated PPM header");
    ++pos;
    const int bps = maxval < 256 ? 1 : 2;
    const long n = static_cast<long>(g.width) * g.height;
    if (s.size() - pos < static_cast<std::size_t>(n * 3 * bps)) throw InputError("truncated PPM pixel data");
    g.pixels.resize(n, 3);
    const auto* d = reinterpret_cast<const unsigned char*>(s.data() + pos);
    for (long i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            const long o = (3 * i + c) * bps;
            const int v = bps == 1 ? d[o] : (d[o] << 8 | d[o + 1]);
            if (v > maxval) throw InputError("PPM sample exceeds maxval");
            g.pixels(i, c) = static_cast<double>(v) / maxval;
        }
    return g;
}

std::string encode_ppm(const PixelGrid& grid) {
    grid.validate();
    std::string out = "P6\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(grid.pixels.rows() * 3));
    for (long i = 0; i < grid.pixels.rows(); ++i)
        for (int c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(grid.pixels(i, c))));
    return out;
}

void write_ppm(const std::string& path, const PixelGrid& grid) {
    const std::string bytes = encode_ppm(grid);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing '" + path + "'");
}

void write_png(const std::string& path, const PixelGrid& grid) {
    grid.validate();
    std::vector<png_byte> buf;
    buf.reserve(static_cast<std::size_t>(grid.pixels.rows() * 3));
    for (long i = 0; i < grid.pixels.rows(); ++i)
        for (int c = 0; c < 3; ++c) buf.push_back(to_byte(grid.pixels(i, c)));
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(grid.width);
    img.height = static_cast<png_uint_32>(grid.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
        throw InputError(std::string("cannot write PNG: ") + img.message);
}

PixelGrid load_image(const std::string& path) {
    const std::string bytes = read_file(path);
    static const std::string png_sig("\x89PNG\r\n\x1a\n", 8);
    PixelGrid g;
    if (bytes.compare(0, 8, png_sig) == 0) {
        g = decode_png(bytes);
    } else if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        g = decode_ppm(bytes);
    } else {
        throw InputError("unsupported image format in '" + path + "' (expected PNG or P6 PPM)");
    }
    g.validate();
    return g;
}

Rgb default_outlier_color(int type) {
    if (type == 0) return {1.0, 1.0, 1.0};
    if (type == 1) return {0.55, 0.27, 0.07};
    return hsv(137.508 * (type - 2), 0.85, 0.9);  // golden-angle hue steps
}

SegmentationResult segment(const PixelGrid& grid, int k, const SegmentConfig& cfg) {
    grid.validate();
    if (k < 2) throw InputError("segmentation needs k >= 2");
    if (grid.pixels.rows() < k) throw InputError("image has fewer pixels than clusters");

    SegmentationResult seg;
    seg.fit = fit(grid.pixels, k, cfg.algo);
    seg.beta = cfg.algo.beta;
    seg.threshold = cfg.algo.threshold;
    seg.c = cfg.algo.constraint.c;
    seg.c1 = cfg.algo.constraint.c1;

    for (const auto& comp : seg.fit.params.components)
        seg.cluster_colors.push_back({std::clamp(comp.mean(0), 0.0, 1.0), std::clamp(comp.mean(1), 0.0, 1.0),
                                      std::clamp(comp.mean(2), 0.0, 1.0)});
    std::set<int> types;
    for (std::size_t i = 0; i < seg.fit.outlier_flags.size(); ++i)
        if (seg.fit.outlier_flags[i]) types.insert(seg.fit.outlier_types[i]);
    seg.outlier_types_present.assign(types.begin(), types.end());
    for (int t : seg.outlier_types_present)
        seg.outlier_colors.push_back(t < static_cast<int>(cfg.outlier_colors.size()) ? cfg.outlier_colors[t]
                                                                                     : default_outlier_color(t));
    return seg;
}

PixelGrid reconstruct(const PixelGrid& grid, const SegmentationResult& seg) {
    grid.validate();
    const auto& fitres = seg.fit;
    if (static_cast<long>(fitres.assignments.size()) != grid.pixels.rows())
        throw DimensionMismatch("segmentation does not match the image");
    PixelGrid out;
    out.width = grid.width;
    out.height = grid.height;
    out.pixels.resize(grid.pixels.rows(), 3);
    for (long i = 0; i < grid.pixels.rows(); ++i) {
        Rgb col;
        if (fitres.outlier_flags[i]) {
            const auto it = std::find(seg.outlier_types_present.begin(), seg.outlier_types_present.end(),
                                      fitres.outlier_types[i]);
            col = seg.outlier_colors[static_cast<std::size_t>(it - seg.outlier_types_present.begin())];
        } else {
            col = seg.cluster_colors[fitres.assignments[i]];
        }
        for (int c = 0; c < 3; ++c) out.pixels(i, c) = col[c];
    }
    return out;
}

}  // namespace mixclust
