#include "malgrid/server.hpp"

#include "malgrid/common.hpp"
#include "malgrid/png.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <map>
#include <regex>

namespace malgrid::server {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kFallbackIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>malgrid</title></head>
<body><h1>malgrid bundle server</h1>
<p>No explorer assets installed. API endpoints:</p>
<ul><li><a href="/api/health">/api/health</a></li><li><a href="/api/bundle">/api/bundle</a></li>
<li>/api/sample/{id}</li><li>/thumbs/{id}.png</li><li>/images/{id}.png</li></ul>
</body></html>
)";

void json_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(ordered_json{{"error", message}}.dump(), "application/json");
}

bool localhost_origin(const std::string& origin) {
    static const std::regex pattern(R"(^https?://(localhost|127\.0\.0\.1|\[::1\])(:\d+)?$)");
    return std::regex_match(origin, pattern);
}

}  // namespace

struct BundleServer::Impl {
    ServerConfig config;
    std::string bundle_text;
    std::map<std::string, ordered_json, std::less<>> records;  // id -> sample record with byteplot metadata
    std::map<std::string, std::string, std::less<>> thumbs;    // id -> PNG bytes
    httplib::Server http;
    bool bound = false;

    void load();
    void routes();
};

void BundleServer::Impl::load() {
    const auto path = config.run_dir / "bundle.json";
    if (!fs::is_regular_file(path)) throw Error("no bundle.json in " + config.run_dir.string() + "; run the pipeline first");
    bundle_text = read_text(path);
    ordered_json doc;
    try {
        doc = ordered_json::parse(bundle_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed bundle: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema") || doc["schema"] != 1)
        throw Error("malformed bundle: expected top-level \"schema\": 1");
    if (!doc.contains("samples") || !doc["samples"].is_array()) throw Error("malformed bundle: missing samples array");
    if (!doc.contains("grid") || !doc["grid"].is_object()) throw Error("malformed bundle: missing grid");

    for (const auto& rec : doc["samples"]) {
        for (const char* field : {"id", "label", "family", "x", "y", "row", "col", "thumbnail", "size_bytes"})
            if (!rec.contains(field)) throw Error(std::string("malformed bundle: sample record lacks \"") + field + "\"");
        const auto id = rec["id"].get<std::string>();
        if (records.contains(id)) throw Error("malformed bundle: duplicate sample id " + id);

        const auto thumb_path = config.run_dir / rec["thumbnail"].get<std::string>();
        if (!fs::is_regular_file(thumb_path)) throw Error("malformed bundle: thumbnail missing for " + id);
        thumbs[id] = read_text(thumb_path);

        ordered_json full = rec;
        const auto image_path = config.run_dir / "images" / (id + ".png");
        if (fs::is_regular_file(image_path)) {
            const auto header = png::read_header(read_file(image_path));
            full["byteplot"] = {{"width", header.width}, {"height", header.height}, {"url", "/images/" + id + ".png"}};
        } else {
            full["byteplot"] = nullptr;
        }
        full["thumbnail_url"] = "/thumbs/" + id + ".png";
        records[id] = std::move(full);
    }
}

void BundleServer::Impl::routes() {
    http.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
        const auto origin = req.get_header_value("Origin");
        if (!origin.empty() && localhost_origin(origin)) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        }
    });
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    http.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(ordered_json{{"status", "ok"}, {"samples", records.size()}}.dump(), "application/json");
    });
    http.Get("/api/bundle", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(bundle_text, "application/json");
    });
    http.Get(R"(/api/sample/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto it = records.find(req.matches[1].str());
        if (it == records.end()) return json_error(res, 404, "unknown sample id " + req.matches[1].str());
        res.set_content(it->second.dump(), "application/json");
    });
    http.Get(R"(/thumbs/([^/]+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto it = thumbs.find(req.matches[1].str());
        if (it == thumbs.end()) return json_error(res, 404, "unknown sample id " + req.matches[1].str());
        res.set_content(it->second, "image/png");
    });
    http.Get(R"(/images/([^/]+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto id = req.matches[1].str();
        const auto it = records.find(id);
        if (it == records.end() || it->second.at("byteplot").is_null()) return json_error(res, 404, "unknown sample id " + id);
        try {
            res.set_content(read_text(config.run_dir / "images" / (id + ".png")), "image/png");
        } catch (const Error& e) {
            json_error(res, 500, e.what());
        }
    });

    auto static_dir = config.static_dir.empty() ? config.run_dir / "ui" : config.static_dir;
    if (fs::is_directory(static_dir)) {
        http.set_mount_point("/", static_dir.string());
    } else {
        http.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kFallbackIndex, "text/html"); });
    }

    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) json_error(res, 404, "not found: " + req.path);
    });
}

BundleServer::BundleServer(ServerConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
    impl_->load();
    impl_->routes();
}

BundleServer::~BundleServer() { stop(); }

std::size_t BundleServer::sample_count() const { return impl_->records.size(); }

int BundleServer::bind() {
    int port = impl_->config.port;
    if (port == 0) {
        port = impl_->http.bind_to_any_port(impl_->config.bind_address);
        if (port < 0) throw Error("cannot bind " + impl_->config.bind_address);
    } else if (!impl_->http.bind_to_port(impl_->config.bind_address, port)) {
        throw Error("cannot bind " + impl_->config.bind_address + ":" + std::to_string(port));
    }
    impl_->bound = true;
    return port;
}

void BundleServer::listen() {
    if (!impl_->bound) bind();
    impl_->http.listen_after_bind();
}

void BundleServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

void BundleServer::stop() {
    if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace malgrid::server
