// malgrid: command-line front end for the corpus -> byteplot -> features ->
// 2D -> grid -> render/classify pipeline.

#include "malgrid/common.hpp"
#include "malgrid/corpus.hpp"
#include "malgrid/pipeline.hpp"
#include "malgrid/server.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <iostream>

namespace {

using namespace malgrid;

struct RunFlags {
    std::string manifest;
    std::string config_file;
    std::string features = "gist320";
    std::string external_features;
    std::string method = "tsne";
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    bool no_standardize = false;
    double grid_aspect = 1.0;
    double grid_slack = 1.0;
    std::size_t exact_threshold = 3000;
    int thumb_side = byteplot::kDefaultThumbSide;
    double tint_alpha = 0.35;
    std::string classifier = "knn";
    int k = 5;
    int trees = 100;
    int max_depth = 0;
    int folds = 10;
    std::uint64_t seed = 0;
    std::string out;
    bool force = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--manifest", f.manifest, "Corpus manifest (from synth or ingest)");
    cmd->add_option("--config", f.config_file, "Start from a saved config.json; other flags override it");
    cmd->add_option("--features", f.features, "Feature kind")->check(CLI::IsMember({"gist320", "external"}));
    cmd->add_option("--external-features", f.external_features, "CSV of externally computed features");
    cmd->add_option("--method", f.method, "Reduction method")->check(CLI::IsMember({"tsne", "pca", "randproj"}));
    cmd->add_option("--perplexity", f.perplexity, "t-SNE perplexity");
    cmd->add_option("--iterations", f.iterations, "t-SNE iterations");
    cmd->add_option("--learning-rate", f.learning_rate, "t-SNE learning rate");
    cmd->add_flag("--no-standardize", f.no_standardize, "Skip per-dimension z-scoring before reduction");
    cmd->add_option("--grid-aspect", f.grid_aspect, "Target cols/rows ratio");
    cmd->add_option("--grid-slack", f.grid_slack, "Grid capacity factor (>= 1) leaving empty cells");
    cmd->add_option("--exact-threshold", f.exact_threshold, "Largest grid solved by the exact assignment");
    cmd->add_option("--thumb-side", f.thumb_side, "Thumbnail side in pixels");
    cmd->add_option("--tint-alpha", f.tint_alpha, "Color tint strength in the grid montage");
    cmd->add_option("--classifier", f.classifier, "Classifier")->check(CLI::IsMember({"knn", "rf"}));
    cmd->add_option("--k", f.k, "KNN neighbors (odd)");
    cmd->add_option("--trees", f.trees, "Random forest size");
    cmd->add_option("--max-depth", f.max_depth, "Random forest depth limit (0 = none)");
    cmd->add_option("--folds", f.folds, "Cross-validation folds");
    cmd->add_option("--seed", f.seed, "Global seed");
    cmd->add_option("--out", f.out, "Run directory");
    cmd->add_flag("--force", f.force, "Recompute stages even when cached");
}

pipeline::RunConfig to_config(const RunFlags& f, const CLI::App* cmd) {
    pipeline::RunConfig c;
    if (!f.config_file.empty()) c = pipeline::RunConfig::from_json(nlohmann::ordered_json::parse(read_text(f.config_file)));
    auto given = [cmd](const char* name) { return cmd->count(name) > 0; };
    const bool fresh = f.config_file.empty();
    if (fresh || given("--manifest")) c.manifest = f.manifest;
    if (fresh || given("--features")) c.feature_kind = gist::parse_feature_kind(f.features);
    if (fresh || given("--external-features")) c.external_features = f.external_features;
    if (fresh || given("--method")) c.method = reduce::parse_method(f.method);
    if (fresh || given("--perplexity")) c.tsne.perplexity = f.perplexity;
    if (fresh || given("--iterations")) c.tsne.iterations = f.iterations;
    if (fresh || given("--learning-rate")) c.tsne.learning_rate = f.learning_rate;
    if (fresh || given("--no-standardize")) c.standardize = !f.no_standardize;
    if (fresh || given("--grid-aspect")) c.grid_aspect = f.grid_aspect;
    if (fresh || given("--grid-slack")) c.grid_slack = f.grid_slack;
    if (fresh || given("--exact-threshold")) c.exact_threshold = f.exact_threshold;
    if (fresh || given("--thumb-side")) c.thumb_side = f.thumb_side;
    if (fresh || given("--tint-alpha")) c.tint_alpha = f.tint_alpha;
    if (fresh || given("--classifier")) c.classifier = f.classifier == "rf" ? pipeline::Classifier::rf : pipeline::Classifier::knn;
    if (fresh || given("--k")) c.k = f.k;
    if (fresh || given("--trees")) c.trees = f.trees;
    if (fresh || given("--max-depth")) c.max_depth = f.max_depth;
    if (fresh || given("--folds")) c.folds = f.folds;
    if (fresh || given("--seed")) c.seed = f.seed;
    if (fresh || given("--out")) c.out = f.out;
    return c;
}

void run_stage_command(const RunFlags& flags, const CLI::App* cmd, std::vector<pipeline::Stage> targets) {
    const auto config = to_config(flags, cmd);
    pipeline::RunOptions opts;
    opts.force = flags.force;
    opts.on_stage = [](const pipeline::StageResult& r) {
        std::cout << "stage " << pipeline::to_string(r.stage) << ": " << (r.cached ? "cached" : "done") << "\n";
    };
    pipeline::run_stages(config, targets, opts);
}

server::BundleServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"malgrid: byteplot similarity maps and thumbnail grids for binary corpora"};
    app.require_subcommand(1);

    // synth
    corpus::SynthSpec synth;
    std::string synth_pack = "none";
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded synthetic family corpus");
    synth_cmd->add_option("--families", synth.n_families, "Number of families");
    synth_cmd->add_option("--variants", synth.variants_per_family, "Variants per family");
    synth_cmd->add_option("--base-size", synth.base_size_bytes, "Base size in bytes");
    synth_cmd->add_option("--mutation-rate", synth.mutation_rate, "Fraction of mutated byte positions");
    synth_cmd->add_option("--pack", synth_pack, "Packing profile")->check(CLI::IsMember({"none", "light", "medium", "heavy"}));
    synth_cmd->add_option("--seed", synth.seed, "Seed");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();

    // ingest
    std::string ingest_root, ingest_labels, ingest_out;
    auto* ingest_cmd = app.add_subcommand("ingest", "Build a manifest from a directory of binaries");
    ingest_cmd->add_option("root", ingest_root, "Corpus directory")->required();
    ingest_cmd->add_option("--labels", ingest_labels, "CSV sample_id,label,family");
    ingest_cmd->add_option("--out", ingest_out, "Manifest path")->required();

    // label
    std::string label_manifest, label_reports, label_out;
    auto* label_cmd = app.add_subcommand("label", "Apply detection-ratio labels from scan reports");
    label_cmd->add_option("--manifest", label_manifest, "Input manifest")->required();
    label_cmd->add_option("--reports", label_reports, "CSV sample_id,positives,total_engines")->required();
    label_cmd->add_option("--out", label_out, "Output manifest (default: overwrite input)");

    RunFlags flags;
    struct StageCmd {
        const char* name;
        const char* help;
        std::vector<pipeline::Stage> targets;
    };
    const std::vector<StageCmd> stage_cmds{
        {"featurize", "Byteplot images and feature vectors", {pipeline::Stage::features}},
        {"reduce", "2D embedding of the features", {pipeline::Stage::reduce}},
        {"gridify", "Assign the embedding to a raster grid", {pipeline::Stage::grid}},
        {"classify", "Cross-validated classification report", {pipeline::Stage::classify}},
        {"render", "Point plot and thumbnail grid images", {pipeline::Stage::render}},
        {"run", "Every stage, ending with bundle.json", pipeline::all_stages()},
    };
    std::vector<CLI::App*> stage_apps;
    for (const auto& sc : stage_cmds) {
        auto* cmd = app.add_subcommand(sc.name, sc.help);
        add_run_flags(cmd, flags);
        stage_apps.push_back(cmd);
    }
    bool print_table = false;
    stage_apps[3]->add_flag("--table", print_table, "Print the Feature <- model | Accuracy | Precision | Recall | F1 row");

    // serve
    server::ServerConfig serve_cfg;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a run directory to the explorer UI");
    serve_cmd->add_option("--run", serve_cfg.run_dir, "Run directory")->required();
    serve_cmd->add_option("--bind", serve_cfg.bind_address, "Bind address");
    serve_cmd->add_option("--port", serve_cfg.port, "Port");
    serve_cmd->add_option("--static", serve_cfg.static_dir, "Explorer asset directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            synth.pack_profile = corpus::parse_pack_profile(synth_pack);
            std::vector<std::string> warnings;
            const auto m = corpus::synthesize(synth, synth_out, warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
            corpus::save_manifest(m, fs::path(synth_out) / "manifest.json");
            std::cout << "wrote " << m.entries.size() << " samples and " << (fs::path(synth_out) / "manifest.json").string() << "\n";
        } else if (ingest_cmd->parsed()) {
            std::optional<corpus::LabelMap> labels;
            if (!ingest_labels.empty()) labels = corpus::load_label_map(ingest_labels);
            std::vector<std::string> warnings;
            const auto m = corpus::ingest(ingest_root, labels ? &*labels : nullptr, warnings);
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
            corpus::save_manifest(m, ingest_out);
            std::cout << "wrote " << m.entries.size() << " samples to " << ingest_out << "\n";
        } else if (label_cmd->parsed()) {
            auto m = corpus::load_manifest(label_manifest);
            m = corpus::label_from_reports(m, corpus::load_scan_reports(label_reports));
            const auto out = label_out.empty() ? label_manifest : label_out;
            corpus::save_manifest(m, out);
            std::cout << "labeled manifest written to " << out << "\n";
        } else if (serve_cmd->parsed()) {
            server::BundleServer srv(serve_cfg);
            g_server = &srv;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int port = srv.bind();
            std::cout << "serving " << srv.sample_count() << " samples on http://" << serve_cfg.bind_address << ":" << port
                      << "/" << std::endl;
            srv.listen();
            g_server = nullptr;
        } else {
            for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
                if (!stage_apps[i]->parsed()) continue;
                run_stage_command(flags, stage_apps[i], stage_cmds[i].targets);
                if (i == 3 && print_table) std::cout << read_text(to_config(flags, stage_apps[i]).out / pipeline::artifact::report_table);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
