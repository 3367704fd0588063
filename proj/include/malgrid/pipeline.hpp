#pragma once

#include "malgrid/classify.hpp"
#include "malgrid/gist.hpp"
#include "malgrid/reduce.hpp"
#include "malgrid/util.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace malgrid::pipeline {

inline constexpr int kBundleSchema = 1;

enum class Classifier { knn, rf };

struct RunConfig {
    fs::path manifest;
    gist::FeatureKind feature_kind = gist::FeatureKind::gist320;
    fs::path external_features;
    int gist_size = gist::kDefaultPreprocessSize;
    reduce::Method method = reduce::Method::tsne;
    reduce::TsneParams tsne;
    bool standardize = true;
    double grid_aspect = 1.0;
    double grid_slack = 1.0;
    std::size_t exact_threshold = 3000;
    int thumb_side = byteplot::kDefaultThumbSide;
    double tint_alpha = 0.35;
    Classifier classifier = Classifier::knn;
    int k = 5;
    int trees = 100;
    int max_depth = 0;
    int folds = 10;
    std::uint64_t seed = 0;
    fs::path out;

    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::ordered_json& j);
    void validate() const;
};

enum class Stage { corpus, byteplot, features, reduce, grid, render, classify, bundle };

std::string to_string(Stage stage);
const std::vector<Stage>& all_stages();

struct StageResult {
    Stage stage;
    bool cached = false;
};

struct RunOptions {
    bool force = false;
    /// Overrides MALGRID_CACHE; when unset, MALGRID_CACHE=0 disables caching.
    std::optional<bool> use_cache;
    /// Called once per stage as it finishes.
    std::function<void(const StageResult&)> on_stage;
};

/// Runs every stage in `targets` plus their dependencies, in pipeline order.
std::vector<StageResult> run_stages(const RunConfig& config, const std::vector<Stage>& targets,
                                    const RunOptions& options = {});

/// Runs `target` and every stage it depends on, writing artifacts under config.out.
std::vector<StageResult> run_until(const RunConfig& config, Stage target, const RunOptions& options = {});

/// All stages in order; returns the run directory.
fs::path run_pipeline(const RunConfig& config, const RunOptions& options = {});

/// Joins manifest, embedding and layout artifacts of a run into bundle.json.
fs::path export_bundle(const fs::path& run_dir);

/// Artifact names inside a run directory.
namespace artifact {
inline constexpr const char* config = "config.json";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* images = "images";
inline constexpr const char* features = "features.csv";
inline constexpr const char* embedding = "embedding.csv";
inline constexpr const char* embedding_meta = "embedding.json";
inline constexpr const char* layout = "layout.csv";
inline constexpr const char* layout_meta = "layout.json";
inline constexpr const char* points_png = "points.png";
inline constexpr const char* points_svg = "points.svg";
inline constexpr const char* grid_png = "grid.png";
inline constexpr const char* report = "report.json";
inline constexpr const char* report_table = "report.txt";
inline constexpr const char* bundle = "bundle.json";
inline constexpr const char* cache = "cache.json";
}  // namespace artifact

std::string image_name(std::string_view sample_id);
std::string thumb_name(std::string_view sample_id);

}  // namespace malgrid::pipeline
