#pragma once

#include <array>
#include <string>
#include <vector>

#include "mixclust/mple.hpp"

namespace mixclust {

using Rgb = std::array<double, 3>;

struct PixelGrid {
    int width = 0;
    int height = 0;
    Matrix pixels;  // (width*height) x 3, row-major pixel order, channels in [0,1]

    void validate() const;
    Rgb at(int x, int y) const;
};

// PNG or binary PPM (P6), chosen by file signature.  Alpha is dropped.
PixelGrid load_image(const std::string& path);
PixelGrid decode_ppm(const std::string& bytes);
std::string encode_ppm(const PixelGrid& grid);
void write_ppm(const std::string& path, const PixelGrid& grid);
void write_png(const std::string& path, const PixelGrid& grid);

struct SegmentConfig {
    AlgoConfig algo;  // rule defaults to nearest-mean here
    std::vector<Rgb> outlier_colors;  // empty -> white, brown, then hue-spaced

    SegmentConfig() { algo.rule = AssignmentRule::NearestMean; }
};

struct SegmentationResult {
    ClusteringResult fit;
    std::vector<int> outlier_types_present;  // sorted cluster indices
    std::vector<Rgb> cluster_colors;         // fitted means clamped to [0,1]
    std::vector<Rgb> outlier_colors;         // one per entry of outlier_types_present
    double beta = 0, threshold = 0, c = 0, c1 = 0;

    std::size_t palette_size() const { return cluster_colors.size() + outlier_colors.size(); }
};

Rgb default_outlier_color(int type);

SegmentationResult segment(const PixelGrid& grid, int k, const SegmentConfig& cfg = {});
PixelGrid reconstruct(const PixelGrid& grid, const SegmentationResult& seg);

}  // namespace mixclust
