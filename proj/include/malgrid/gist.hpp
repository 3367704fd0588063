#pragma once

#include "malgrid/byteplot.hpp"
#include "malgrid/util.hpp"

#include <array>
#include <string>
#include <vector>

namespace malgrid::gist {

inline constexpr int kDefaultPreprocessSize = 64;
inline constexpr int kBlockGrid = 4;
inline constexpr std::array<int, 3> kOrientationsPerScale{8, 8, 4};
inline constexpr int kChannels = 20;
inline constexpr int kGistDim = kChannels * kBlockGrid * kBlockGrid;

/// Highest-scale center frequency in cycles per pixel; halves per scale.
inline constexpr double kTopCenterFrequency = 0.25;
/// Log-Gabor radial bandwidth parameter (sigma / f0).
inline constexpr double kRadialSigmaRatio = 0.55;

/// Real-valued grayscale plane used below the byteplot layer.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> values;
};

struct Channel {
    int scale_index = 0;
    int orientation_index = 0;
    double center_frequency = 0.0;
    double orientation = 0.0;  ///< radians in [0, pi)
    /// Transfer function on the centered frequency grid: entry (i, j) is the
    /// gain at (fy, fx) = ((i - P/2) / P, (j - P/2) / P) cycles per pixel.
    std::vector<double> transfer;
};

struct GaborBank {
    int preprocess_size = 0;
    std::vector<Channel> channels;

    /// Gain of a channel at centered grid index (i, j).
    double gain(std::size_t channel, int i, int j) const {
        return channels[channel].transfer[static_cast<std::size_t>(i) * preprocess_size + j];
    }
};

enum class FeatureKind { gist320, external };

struct FeatureVector {
    std::string sample_id;
    std::vector<double> values;
    FeatureKind kind = FeatureKind::gist320;
    int dim = 0;
};

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

GaborBank build_bank(int preprocess_size = kDefaultPreprocessSize);

/// Closed-form channel gain at an arbitrary frequency (cycles per pixel).
double transfer_at(const Channel& ch, double fx, double fy);

/// Area-weighted resample of a plane to width x height.
Plane resize_area(const Plane& src, int width, int height);

/// Zero mean, unit variance; variance is floored at 1e-8.
void normalize(Plane& plane);

/// Averages a P x P response over a grid x grid block layout, block-row-major.
std::vector<double> pool_blocks(std::span<const double> response, int size, int grid = kBlockGrid);

/// Descriptor of a real-valued plane (resized to the bank's P first).
std::vector<double> describe(const Plane& plane, const GaborBank& bank);

FeatureVector gist(const byteplot::ByteplotImage& img, const GaborBank& bank, std::string sample_id = {});

/// Reads `sample_id,f0,...,f{d-1}` CSV. Empty file -> empty list.
std::vector<FeatureVector> parse_external_features(std::string_view csv,
                                                   FeatureKind kind = FeatureKind::external);
std::vector<FeatureVector> load_external_features(const fs::path& path);

/// Writes the same CSV layout (header included) for any feature set of one dim.
std::string features_to_csv(const std::vector<FeatureVector>& features);

}  // namespace malgrid::gist
