#include "malgrid/common.hpp"
#include "malgrid/corpus.hpp"
#include "malgrid/pipeline.hpp"
#include "malgrid/png.hpp"
#include "malgrid/server.hpp"

#include "../support.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <thread>

using namespace malgrid;
using malgrid::testing::TempDir;
using ordered_json = nlohmann::ordered_json;

namespace {

fs::path make_run(const TempDir& dir) {
    corpus::SynthSpec spec;
    spec.n_families = 2;
    spec.variants_per_family = 3;
    spec.base_size_bytes = 4096;
    spec.seed = 11;
    corpus::save_manifest(corpus::synthesize(spec, dir / "corpus"), dir / "corpus" / "manifest.json");
    pipeline::RunConfig config;
    config.manifest = dir / "corpus" / "manifest.json";
    config.out = dir / "run";
    config.method = reduce::Method::pca;
    config.k = 1;
    config.folds = 3;
    pipeline::RunOptions options;
    options.use_cache = false;
    return pipeline::run_pipeline(config, options);
}

std::string tree_digest(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += fs::relative(f, root).generic_string() + ":" + sha256_hex(read_file(f)) + "\n";
    return sha256_hex(acc);
}

struct Running {
    server::BundleServer srv;
    int port;
    std::thread thread;

    explicit Running(server::ServerConfig cfg) : srv(std::move(cfg)), port(srv.bind()), thread([this] { srv.listen(); }) {
        srv.wait_until_ready();
    }
    ~Running() {
        srv.stop();
        thread.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

server::ServerConfig config_for(const fs::path& run) {
    server::ServerConfig cfg;
    cfg.run_dir = run;
    cfg.port = 0;
    return cfg;
}

}  // namespace

TEST_CASE("API endpoints serve the run read-only") {
    TempDir dir("server");
    const auto run = make_run(dir);
    const auto before = tree_digest(run);
    const auto bundle_text = read_text(run / pipeline::artifact::bundle);
    const auto bundle = ordered_json::parse(bundle_text);

    Running r(config_for(run));
    CHECK(r.srv.sample_count() == 6);
    auto cli = r.client();

    auto health = cli.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(ordered_json::parse(health->body) == ordered_json{{"status", "ok"}, {"samples", 6}});

    auto b1 = cli.Get("/api/bundle");
    auto b2 = cli.Get("/api/bundle");
    REQUIRE((b1 && b2));
    CHECK(b1->body == bundle_text);
    CHECK(b2->body == b1->body);
    CHECK(b1->get_header_value("Content-Type") == "application/json");

    for (const auto& rec : bundle["samples"]) {
        const auto id = rec["id"].get<std::string>();
        auto s = cli.Get("/api/sample/" + id);
        REQUIRE(s);
        CHECK(s->status == 200);
        const auto got = ordered_json::parse(s->body);
        for (const auto& [k, v] : rec.items()) CHECK(got[k] == v);
        const auto img = png::read(run / pipeline::artifact::images / pipeline::image_name(id), 1);
        CHECK(got["byteplot"]["width"] == img.width);
        CHECK(got["byteplot"]["height"] == img.height);
        CHECK(got["thumbnail_url"] == "/thumbs/" + id + ".png");

        auto t = cli.Get(got["thumbnail_url"].get<std::string>());
        REQUIRE(t);
        CHECK(t->status == 200);
        CHECK(t->get_header_value("Content-Type") == "image/png");
        CHECK(t->body == read_text(run / rec["thumbnail"].get<std::string>()));

        auto full = cli.Get(got["byteplot"]["url"].get<std::string>());
        REQUIRE(full);
        CHECK(full->status == 200);
        CHECK(png::read_header(std::vector<std::uint8_t>(full->body.begin(), full->body.end())).width == img.width);
    }

    for (const std::string path : {"/api/sample/deadbeef", "/thumbs/deadbeef.png", "/images/deadbeef.png", "/nope"}) {
        auto res = cli.Get(path);
        REQUIRE(res);
        CHECK(res->status == 404);
        CHECK(ordered_json::parse(res->body).contains("error"));
    }

    auto index = cli.Get("/");
    REQUIRE(index);
    CHECK(index->status == 200);
    CHECK(index->body.find("/api/bundle") != std::string::npos);

    CHECK(tree_digest(run) == before);
}

TEST_CASE("CORS is limited to localhost origins") {
    TempDir dir("server");
    Running r(config_for(make_run(dir)));
    auto cli = r.client();
    auto local = cli.Get("/api/health", {{"Origin", "http://localhost:5173"}});
    REQUIRE(local);
    CHECK(local->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
    auto remote = cli.Get("/api/health", {{"Origin", "http://example.com"}});
    REQUIRE(remote);
    CHECK_FALSE(remote->has_header("Access-Control-Allow-Origin"));
    auto pre = cli.Options("/api/bundle", {{"Origin", "http://127.0.0.1:3000"}});
    REQUIRE(pre);
    CHECK(pre->status == 204);
    CHECK(pre->get_header_value("Access-Control-Allow-Origin") == "http://127.0.0.1:3000");
}

TEST_CASE("static directory replaces the fallback index") {
    TempDir dir("server");
    const auto run = make_run(dir);
    fs::create_directories(dir / "ui");
    write_text(dir / "ui" / "index.html", "<p>explorer</p>");
    auto cfg = config_for(run);
    cfg.static_dir = dir / "ui";
    Running r(cfg);
    auto res = r.client().Get("/");
    REQUIRE(res);
    CHECK(res->body == "<p>explorer</p>");
    auto api = r.client().Get("/api/health");
    REQUIRE(api);
    CHECK(api->status == 200);
}

TEST_CASE("malformed bundles are rejected at startup") {
    TempDir dir("server");
    const auto run = make_run(dir);
    const auto good = read_text(run / pipeline::artifact::bundle);
    auto expect_error = [&](const std::string& text, const std::string& fragment) {
        write_text(run / pipeline::artifact::bundle, text);
        CHECK_THROWS_WITH_AS(server::BundleServer(config_for(run)), doctest::Contains(fragment.c_str()), Error);
    };
    expect_error("{not json", "malformed bundle");
    expect_error(R"({"schema":2,"grid":{},"samples":[]})", "schema");
    auto doc = ordered_json::parse(good);
    doc["samples"][0].erase("row");
    expect_error(doc.dump(), "\"row\"");
    doc = ordered_json::parse(good);
    doc["samples"].push_back(doc["samples"][0]);
    expect_error(doc.dump(), "duplicate");
    fs::remove(run / pipeline::artifact::bundle);
    CHECK_THROWS_WITH_AS(server::BundleServer(config_for(run)), doctest::Contains("no bundle.json"), Error);
}
