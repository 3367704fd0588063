#include "malgrid/pipeline.hpp"

#include "malgrid/byteplot.hpp"
#include "malgrid/common.hpp"
#include "malgrid/corpus.hpp"
#include "malgrid/gridmap.hpp"
#include "malgrid/png.hpp"
#include "malgrid/render.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

namespace malgrid::pipeline {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::corpus: return "corpus";
        case Stage::byteplot: return "byteplot";
        case Stage::features: return "features";
        case Stage::reduce: return "reduce";
        case Stage::grid: return "grid";
        case Stage::render: return "render";
        case Stage::classify: return "classify";
        case Stage::bundle: return "bundle";
    }
    return "?";
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::corpus, Stage::byteplot, Stage::features, Stage::reduce,
                                           Stage::grid,   Stage::render,   Stage::classify, Stage::bundle};
    return stages;
}

std::string image_name(std::string_view sample_id) { return std::string(sample_id) + ".png"; }
std::string thumb_name(std::string_view sample_id) { return std::string(sample_id) + ".thumb.png"; }

// ---------------------------------------------------------------------------
// RunConfig

ordered_json RunConfig::to_json() const {
    ordered_json j;
    j["manifest"] = manifest.generic_string();
    j["feature_kind"] = gist::to_string(feature_kind);
    j["external_features"] = external_features.generic_string();
    j["gist_size"] = gist_size;
    j["method"] = reduce::to_string(method);
    j["tsne"] = tsne.to_json();
    j["standardize"] = standardize;
    j["grid_aspect"] = grid_aspect;
    j["grid_slack"] = grid_slack;
    j["exact_threshold"] = exact_threshold;
    j["thumb_side"] = thumb_side;
    j["tint_alpha"] = tint_alpha;
    j["classifier"] = classifier == Classifier::knn ? "knn" : "rf";
    j["k"] = k;
    j["trees"] = trees;
    j["max_depth"] = max_depth;
    j["folds"] = folds;
    j["seed"] = seed;
    j["out"] = out.generic_string();
    return j;
}

RunConfig RunConfig::from_json(const ordered_json& j) {
    RunConfig c;
    try {
        c.manifest = j.at("manifest").get<std::string>();
        c.feature_kind = gist::parse_feature_kind(j.at("feature_kind").get<std::string>());
        c.external_features = j.at("external_features").get<std::string>();
        c.gist_size = j.at("gist_size").get<int>();
        c.method = reduce::parse_method(j.at("method").get<std::string>());
        const auto& t = j.at("tsne");
        c.tsne.perplexity = t.at("perplexity").get<double>();
        c.tsne.iterations = t.at("iterations").get<int>();
        c.tsne.learning_rate = t.at("learning_rate").get<double>();
        c.tsne.early_exaggeration = t.at("early_exaggeration").get<double>();
        c.tsne.exaggeration_iters = t.at("exaggeration_iters").get<int>();
        c.tsne.momentum_initial = t.at("momentum_initial").get<double>();
        c.tsne.momentum_final = t.at("momentum_final").get<double>();
        c.tsne.seed = t.at("seed").get<std::uint64_t>();
        c.standardize = j.at("standardize").get<bool>();
        c.grid_aspect = j.at("grid_aspect").get<double>();
        c.grid_slack = j.at("grid_slack").get<double>();
        c.exact_threshold = j.at("exact_threshold").get<std::size_t>();
        c.thumb_side = j.at("thumb_side").get<int>();
        c.tint_alpha = j.at("tint_alpha").get<double>();
        const auto cls = j.at("classifier").get<std::string>();
        if (cls != "knn" && cls != "rf") throw Error("unknown classifier '" + cls + "'");
        c.classifier = cls == "knn" ? Classifier::knn : Classifier::rf;
        c.k = j.at("k").get<int>();
        c.trees = j.at("trees").get<int>();
        c.max_depth = j.at("max_depth").get<int>();
        c.folds = j.at("folds").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.out = j.at("out").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed run config: ") + e.what());
    }
    return c;
}

void RunConfig::validate() const {
    if (out.empty()) throw Error("run config: output directory is required");
    if (manifest.empty()) throw Error("run config: manifest path is required");
    if (feature_kind == gist::FeatureKind::external && external_features.empty())
        throw Error("run config: external features need a feature file");
    if (!(grid_aspect > 0.0)) throw Error("run config: grid aspect must be positive");
    if (!(grid_slack >= 1.0)) throw Error("run config: grid slack must be >= 1");
    if (thumb_side < 8) throw Error("run config: thumbnail side must be >= 8");
    if (!(tint_alpha >= 0.0 && tint_alpha <= 1.0)) throw Error("run config: tint alpha must lie in [0, 1]");
    if (k < 1 || k % 2 == 0) throw Error("run config: k must be a positive odd integer");
    if (trees < 1) throw Error("run config: trees must be positive");
    if (folds < 2) throw Error("run config: folds must be >= 2");
}

// ---------------------------------------------------------------------------
// Stage machinery

namespace {

std::string file_hash(const fs::path& path) { return sha256_hex(read_file(path)); }

struct Context {
    const RunConfig& config;
    fs::path dir;

    fs::path at(std::string_view name) const { return dir / name; }
};

struct StageDef {
    std::vector<Stage> deps;
    std::function<std::string(const Context&)> key;
    std::function<std::vector<fs::path>(const Context&)> outputs;
    std::function<void(const Context&)> run;
};

corpus::CorpusManifest run_manifest(const Context& ctx) { return corpus::load_manifest(ctx.at(artifact::manifest)); }

std::vector<render::Annotation> annotations_for(const corpus::CorpusManifest& m, const std::vector<std::string>& ids) {
    std::map<std::string_view, const corpus::Sample*> by_id;
    for (const auto& s : m.entries) by_id[s.id] = &s;
    std::vector<render::Annotation> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("sample " + id + " is not in the manifest");
        out.push_back({it->second->label, it->second->family});
    }
    return out;
}

std::vector<std::string> families_of(const corpus::CorpusManifest& m) {
    std::vector<std::string> fams;
    for (const auto& s : m.entries)
        if (s.family) fams.push_back(*s.family);
    return fams;
}

std::vector<gist::FeatureVector> load_run_features(const Context& ctx) {
    return gist::parse_external_features(read_text(ctx.at(artifact::features)), ctx.config.feature_kind);
}

// -- corpus
void stage_corpus(const Context& ctx) {
    const auto m = corpus::load_manifest(ctx.config.manifest);
    for (const auto& s : m.entries)
        if (!fs::is_regular_file(s.path)) throw Error("sample file missing: " + s.path);
    corpus::save_manifest(m, ctx.at(artifact::manifest));
}

// -- byteplot
void stage_byteplot(const Context& ctx) {
    const auto m = run_manifest(ctx);
    const auto images = ctx.at(artifact::images);
    fs::create_directories(images);
    parallel_for(m.entries.size(), [&](std::size_t i) {
        const auto& s = m.entries[i];
        const auto bytes = read_file(s.path);
        if (bytes.size() != s.size_bytes || sha256_hex(bytes) != s.id)
            throw Error("content of " + s.path + " changed since ingestion");
        const auto img = byteplot::to_byteplot(bytes);
        png::write(images / image_name(s.id), byteplot::to_raster(img));
        png::write(images / thumb_name(s.id), byteplot::to_raster(byteplot::to_thumbnail(img, ctx.config.thumb_side)));
    });
}

// -- features
void stage_features(const Context& ctx) {
    const auto m = run_manifest(ctx);
    std::vector<gist::FeatureVector> features;
    if (ctx.config.feature_kind == gist::FeatureKind::gist320) {
        const auto bank = gist::build_bank(ctx.config.gist_size);
        features.resize(m.entries.size());
        parallel_for(m.entries.size(), [&](std::size_t i) {
            const auto& id = m.entries[i].id;
            const auto img = byteplot::from_raster(png::read(ctx.at(artifact::images) / image_name(id), 1));
            features[i] = gist::gist(img, bank, id);
        });
    } else {
        auto loaded = gist::load_external_features(ctx.config.external_features);
        std::map<std::string, gist::FeatureVector> by_id;
        for (auto& fv : loaded) by_id[fv.sample_id] = std::move(fv);
        std::vector<std::string> missing;
        for (const auto& s : m.entries) {
            auto it = by_id.find(s.id);
            if (it == by_id.end()) {
                missing.push_back(s.id);
                continue;
            }
            features.push_back(std::move(it->second));
        }
        if (!missing.empty()) {
            std::string msg = "external feature file lacks samples:";
            for (const auto& id : missing) msg += " " + id;
            throw Error(msg);
        }
    }
    write_text(ctx.at(artifact::features), gist::features_to_csv(features));
}

// -- reduce
void stage_reduce(const Context& ctx) {
    const auto features = load_run_features(ctx);
    if (features.empty()) throw Error("no feature vectors");
    const auto n = static_cast<Eigen::Index>(features.size());
    const auto d = static_cast<Eigen::Index>(features.front().values.size());
    reduce::Matrix X(n, d);
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) {
        ids.push_back(features[i].sample_id);
        for (Eigen::Index c = 0; c < d; ++c) X(i, c) = features[i].values[c];
    }
    if (ctx.config.standardize) X = reduce::standardize(X);

    reduce::Embedding2D emb;
    switch (ctx.config.method) {
        case reduce::Method::tsne: {
            auto params = ctx.config.tsne;
            params.seed = ctx.config.seed;
            emb = reduce::tsne(X, params, ids);
            break;
        }
        case reduce::Method::pca: emb = reduce::pca2(X, ids); break;
        case reduce::Method::randproj: emb = reduce::randproj2(X, ctx.config.seed, ids); break;
    }
    emb.params["standardized"] = ctx.config.standardize;
    write_text(ctx.at(artifact::embedding), reduce::embedding_to_csv(emb));
    write_text(ctx.at(artifact::embedding_meta), reduce::embedding_sidecar(emb));
}

reduce::Embedding2D load_embedding(const Context& ctx) {
    return reduce::embedding_from_files(read_text(ctx.at(artifact::embedding)), read_text(ctx.at(artifact::embedding_meta)));
}

gridmap::GridLayout load_layout(const fs::path& dir) {
    return gridmap::layout_from_files(read_text(dir / artifact::layout), read_text(dir / artifact::layout_meta));
}

// -- grid
void stage_grid(const Context& ctx) {
    const auto emb = load_embedding(ctx);
    const auto [rows, cols] = gridmap::choose_grid_with_slack(emb.sample_ids.size(), ctx.config.grid_aspect, ctx.config.grid_slack);
    gridmap::AssignOptions opts;
    opts.exact_threshold = ctx.config.exact_threshold;
    const auto layout = gridmap::assign(emb, rows, cols, opts);
    write_text(ctx.at(artifact::layout), gridmap::layout_to_csv(layout));
    write_text(ctx.at(artifact::layout_meta), gridmap::layout_sidecar(layout));
}

// -- render
void stage_render(const Context& ctx) {
    const auto m = run_manifest(ctx);
    const auto emb = load_embedding(ctx);
    const auto layout = load_layout(ctx.dir);
    const auto palette = render::make_palette(families_of(m));
    render::plot_points(emb, annotations_for(m, emb.sample_ids), palette, ctx.at("points"));

    std::vector<byteplot::Thumbnail> thumbs(layout.sample_ids.size());
    for (std::size_t i = 0; i < thumbs.size(); ++i) {
        const auto path = ctx.at(artifact::images) / thumb_name(layout.sample_ids[i]);
        if (!fs::is_regular_file(path)) throw Error("missing thumbnail for sample " + layout.sample_ids[i]);
        thumbs[i] = byteplot::thumbnail_from_raster(png::read(path, 1));
    }
    std::vector<const byteplot::Thumbnail*> ptrs;
    for (const auto& t : thumbs) ptrs.push_back(&t);
    render::MontageOptions opts;
    opts.tint_alpha = ctx.config.tint_alpha;
    png::write(ctx.at(artifact::grid_png), render::montage(layout, ptrs, annotations_for(m, layout.sample_ids), palette, opts));
}

// -- classify
void stage_classify(const Context& ctx) {
    const auto m = run_manifest(ctx);
    const auto features = load_run_features(ctx);

    std::map<std::string_view, const corpus::Sample*> by_id;
    for (const auto& s : m.entries) by_id[s.id] = &s;
    // Families are the classes when every labeled sample has one; otherwise the labels are.
    bool use_family = true;
    for (const auto& s : m.entries)
        if (s.label != corpus::Label::unlabeled && !s.family) use_family = false;

    classify::Dataset ds;
    std::vector<std::string> class_of;
    std::vector<const gist::FeatureVector*> rows;
    for (const auto& fv : features) {
        const auto it = by_id.find(fv.sample_id);
        if (it == by_id.end()) throw Error("feature row for unknown sample " + fv.sample_id);
        const auto& s = *it->second;
        if (s.label == corpus::Label::unlabeled) continue;
        class_of.push_back(use_family ? *s.family : corpus::to_string(s.label));
        rows.push_back(&fv);
    }
    std::set<std::string> names(class_of.begin(), class_of.end());
    ordered_json out;
    if (names.size() < 2) {
        out["skipped"] = "fewer than two classes among labeled samples";
        write_text(ctx.at(artifact::report), out.dump(2) + "\n");
        write_text(ctx.at(artifact::report_table), "skipped: fewer than two classes\n");
        return;
    }
    ds.class_names.assign(names.begin(), names.end());
    const auto d = static_cast<Eigen::Index>(rows.front()->values.size());
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index c = 0; c < d; ++c) ds.X(static_cast<Eigen::Index>(i), c) = rows[i]->values[c];
        ds.y.push_back(static_cast<int>(std::lower_bound(ds.class_names.begin(), ds.class_names.end(), class_of[i]) -
                                        ds.class_names.begin()));
        ds.sample_ids.push_back(rows[i]->sample_id);
    }
    classify::ModelSpec spec = ctx.config.classifier == Classifier::knn
                                   ? classify::ModelSpec{classify::KnnSpec{ctx.config.k}}
                                   : classify::ModelSpec{classify::RfSpec{ctx.config.trees, ctx.config.max_depth}};
    const auto report = classify::cross_validate(ds, spec, ctx.config.folds, ctx.config.seed);
    out = report.to_json();
    out["class_source"] = use_family ? "family" : "label";
    write_text(ctx.at(artifact::report), out.dump(2) + "\n");
    const std::string feature_name = ctx.config.feature_kind == gist::FeatureKind::gist320 ? "Byteplot GIST" : "External";
    write_text(ctx.at(artifact::report_table), classify::table_header() + "\n" + report.table_row(feature_name) + "\n");
}

// -- bundle
void stage_bundle(const Context& ctx) { export_bundle(ctx.dir); }

std::string key_of(Stage stage, const ordered_json& config_part, const std::vector<fs::path>& inputs) {
    std::string material = to_string(stage) + "\n" + config_part.dump() + "\n";
    for (const auto& p : inputs) material += p.filename().generic_string() + ":" + file_hash(p) + "\n";
    return sha256_hex(material);
}

const std::map<Stage, StageDef>& stage_table() {
    static const std::map<Stage, StageDef> table = [] {
        std::map<Stage, StageDef> t;
        t[Stage::corpus] = {
            {},
            [](const Context& c) {
                if (!fs::is_regular_file(c.config.manifest)) throw Error("manifest not found: " + c.config.manifest.string());
                ordered_json part = fs::absolute(c.config.manifest).lexically_normal().generic_string();
                return key_of(Stage::corpus, part, {c.config.manifest});
            },
            [](const Context& c) { return std::vector<fs::path>{c.at(artifact::manifest)}; },
            stage_corpus};
        t[Stage::byteplot] = {
            {Stage::corpus},
            [](const Context& c) { return key_of(Stage::byteplot, c.config.thumb_side, {c.at(artifact::manifest)}); },
            [](const Context& c) {
                std::vector<fs::path> out;
                for (const auto& s : run_manifest(c).entries) {
                    out.push_back(c.at(artifact::images) / image_name(s.id));
                    out.push_back(c.at(artifact::images) / thumb_name(s.id));
                }
                return out;
            },
            stage_byteplot};
        t[Stage::features] = {
            {Stage::byteplot},
            [](const Context& c) {
                ordered_json part{{"kind", gist::to_string(c.config.feature_kind)}, {"gist_size", c.config.gist_size}};
                std::vector<fs::path> inputs{c.at(artifact::manifest)};
                if (c.config.feature_kind == gist::FeatureKind::external) inputs.push_back(c.config.external_features);
                return key_of(Stage::features, part, inputs);
            },
            [](const Context& c) { return std::vector<fs::path>{c.at(artifact::features)}; },
            stage_features};
        t[Stage::reduce] = {
            {Stage::features},
            [](const Context& c) {
                ordered_json part{{"method", reduce::to_string(c.config.method)},
                                  {"tsne", c.config.tsne.to_json()},
                                  {"standardize", c.config.standardize},
                                  {"seed", c.config.seed}};
                return key_of(Stage::reduce, part, {c.at(artifact::features)});
            },
            [](const Context& c) { return std::vector<fs::path>{c.at(artifact::embedding), c.at(artifact::embedding_meta)}; },
            stage_reduce};
        t[Stage::grid] = {
            {Stage::reduce},
            [](const Context& c) {
                ordered_json part{{"aspect", c.config.grid_aspect},
                                  {"slack", c.config.grid_slack},
                                  {"exact_threshold", c.config.exact_threshold}};
                return key_of(Stage::grid, part, {c.at(artifact::embedding), c.at(artifact::embedding_meta)});
            },
            [](const Context& c) { return std::vector<fs::path>{c.at(artifact::layout), c.at(artifact::layout_meta)}; },
            stage_grid};
        t[Stage::render] = {
            {Stage::grid, Stage::byteplot},
            [](const Context& c) {
                ordered_json part{{"tint_alpha", c.config.tint_alpha}, {"thumb_side", c.config.thumb_side}};
                return key_of(Stage::render, part,
                              {c.at(artifact::manifest), c.at(artifact::embedding), c.at(artifact::layout), c.at(artifact::layout_meta)});
            },
            [](const Context& c) {
                return std::vector<fs::path>{c.at(artifact::points_png), c.at(artifact::points_svg), c.at(artifact::grid_png)};
            },
            stage_render};
        t[Stage::classify] = {
            {Stage::features},
            [](const Context& c) {
                ordered_json part{{"classifier", c.config.classifier == Classifier::knn ? "knn" : "rf"},
                                  {"k", c.config.k},
                                  {"trees", c.config.trees},
                                  {"max_depth", c.config.max_depth},
                                  {"folds", c.config.folds},
                                  {"seed", c.config.seed}};
                return key_of(Stage::classify, part, {c.at(artifact::manifest), c.at(artifact::features)});
            },
            [](const Context& c) { return std::vector<fs::path>{c.at(artifact::report), c.at(artifact::report_table)}; },
            stage_classify};
        t[Stage::bundle] = {
            {Stage::grid},
            [](const Context& c) {
                return key_of(Stage::bundle, ordered_json(kBundleSchema),
                              {c.at(artifact::manifest), c.at(artifact::embedding), c.at(artifact::embedding_meta),
                               c.at(artifact::layout), c.at(artifact::layout_meta)});
            },
            [](const Context& c) { return std::vector<fs::path>{c.at(artifact::bundle)}; },
            stage_bundle};
        return t;
    }();
    return table;
}

void collect(Stage s, std::set<Stage>& needed) {
    if (!needed.insert(s).second) return;
    for (Stage d : stage_table().at(s).deps) collect(d, needed);
}

bool cache_enabled(const RunOptions& options) {
    if (options.use_cache) return *options.use_cache;
    const char* env = std::getenv("MALGRID_CACHE");
    return !(env && std::string_view(env) == "0");
}

}  // namespace

std::vector<StageResult> run_stages(const RunConfig& config, const std::vector<Stage>& targets, const RunOptions& options) {
    config.validate();
    fs::create_directories(config.out);
    const Context ctx{config, config.out};
    write_text(ctx.at(artifact::config), config.to_json().dump(2) + "\n");

    ordered_json cache = ordered_json::object();
    const bool use_cache = cache_enabled(options) && !options.force;
    if (use_cache && fs::is_regular_file(ctx.at(artifact::cache))) {
        try {
            cache = ordered_json::parse(read_text(ctx.at(artifact::cache)));
        } catch (const nlohmann::json::exception&) {
            cache = ordered_json::object();
        }
    }

    std::set<Stage> needed;
    for (Stage target : targets) collect(target, needed);
    std::vector<StageResult> results;
    for (Stage stage : all_stages()) {
        if (!needed.contains(stage)) continue;
        const auto& def = stage_table().at(stage);
        const auto name = to_string(stage);
        try {
            const std::string key = def.key(ctx);
            bool cached = false;
            if (use_cache && cache.contains(name) && cache[name] == key) {
                const auto outs = def.outputs(ctx);
                cached = std::all_of(outs.begin(), outs.end(), [](const fs::path& p) { return fs::exists(p); });
            }
            if (!cached) {
                def.run(ctx);
                cache[name] = key;
                write_text(ctx.at(artifact::cache), cache.dump(2) + "\n");
            }
            results.push_back({stage, cached});
            if (options.on_stage) options.on_stage(results.back());
        } catch (const std::exception& e) {
            throw Error("stage " + name + ": " + e.what());
        }
    }
    return results;
}

std::vector<StageResult> run_until(const RunConfig& config, Stage target, const RunOptions& options) {
    return run_stages(config, {target}, options);
}

fs::path run_pipeline(const RunConfig& config, const RunOptions& options) {
    run_stages(config, all_stages(), options);
    return config.out;
}

fs::path export_bundle(const fs::path& run_dir) {
    for (const char* name : {artifact::manifest, artifact::embedding, artifact::embedding_meta, artifact::layout, artifact::layout_meta})
        if (!fs::is_regular_file(run_dir / name)) throw Error(std::string("bundle export needs ") + name + " in " + run_dir.string());
    const auto m = corpus::load_manifest(run_dir / artifact::manifest);
    const auto emb = reduce::embedding_from_files(read_text(run_dir / artifact::embedding), read_text(run_dir / artifact::embedding_meta));
    const auto layout = load_layout(run_dir);

    std::set<std::string> manifest_ids, emb_ids(emb.sample_ids.begin(), emb.sample_ids.end()),
        layout_ids(layout.sample_ids.begin(), layout.sample_ids.end());
    for (const auto& s : m.entries) manifest_ids.insert(s.id);
    if (manifest_ids != emb_ids || emb_ids != layout_ids) {
        std::set<std::string> all;
        all.insert(manifest_ids.begin(), manifest_ids.end());
        all.insert(emb_ids.begin(), emb_ids.end());
        all.insert(layout_ids.begin(), layout_ids.end());
        std::string msg = "inconsistent sample sets across artifacts; symmetric difference:";
        for (const auto& id : all) {
            if (manifest_ids.contains(id) && emb_ids.contains(id) && layout_ids.contains(id)) continue;
            msg += " " + id + " (";
            msg += manifest_ids.contains(id) ? "manifest" : "";
            msg += emb_ids.contains(id) ? " embedding" : "";
            msg += layout_ids.contains(id) ? " layout" : "";
            msg += ")";
        }
        throw Error(msg);
    }

    std::map<std::string_view, std::size_t> emb_row, layout_row;
    for (std::size_t i = 0; i < emb.sample_ids.size(); ++i) emb_row[emb.sample_ids[i]] = i;
    for (std::size_t i = 0; i < layout.sample_ids.size(); ++i) layout_row[layout.sample_ids[i]] = i;

    const auto palette = render::make_palette(families_of(m));
    std::vector<render::Annotation> notes;
    for (const auto& s : m.entries) notes.push_back({s.label, s.family});
    const bool by_family = render::color_by_family(notes);

    ordered_json samples = ordered_json::array();
    for (const auto& s : m.entries) {
        const auto e = emb_row.at(s.id);
        const auto c = layout.cells[layout_row.at(s.id)];
        ordered_json r;
        r["id"] = s.id;
        r["label"] = corpus::to_string(s.label);
        r["family"] = s.family ? ordered_json(*s.family) : ordered_json(nullptr);
        r["x"] = emb.coords(static_cast<Eigen::Index>(e), 0);
        r["y"] = emb.coords(static_cast<Eigen::Index>(e), 1);
        r["row"] = c.row;
        r["col"] = c.col;
        r["thumbnail"] = std::string(artifact::images) + "/" + thumb_name(s.id);
        r["size_bytes"] = s.size_bytes;
        samples.push_back(std::move(r));
    }

    ordered_json labels = ordered_json::object();
    for (const auto& [label, color] : palette.label_colors) labels[corpus::to_string(label)] = color.hex();
    ordered_json families = ordered_json::object();
    for (std::size_t i = 0; i < palette.families.size(); ++i) families[palette.families[i]] = palette.family_colors[i].hex();
    ordered_json empty = ordered_json::array();
    for (const auto& c : layout.empty_cells) empty.push_back({c.row, c.col});

    ordered_json bundle;
    bundle["schema"] = kBundleSchema;
    bundle["grid"] = {{"rows", layout.rows}, {"cols", layout.cols}, {"empty_cells", std::move(empty)},
                      {"cost", layout.cost}, {"degenerate", layout.degenerate}};
    bundle["method"] = {{"name", reduce::to_string(emb.method)}, {"params", emb.params}};
    bundle["color_mode"] = by_family ? "by_family" : "by_label";
    bundle["palette"] = {{"labels", std::move(labels)}, {"families", std::move(families)}, {"empty_cell", render::kEmptyCell.hex()}};
    bundle["samples"] = std::move(samples);

    const auto path = run_dir / artifact::bundle;
    write_text(path, bundle.dump(2) + "\n");
    return path;
}

}  // namespace malgrid::pipeline
