#pragma once

#include "malgrid/util.hpp"

#include <memory>
#include <string>

namespace malgrid::server {

inline constexpr int kDefaultPort = 8787;

struct ServerConfig {
    fs::path run_dir;
    std::string bind_address = "127.0.0.1";
    int port = kDefaultPort;
    /// Explorer assets served at `/`; defaults to `<run_dir>/ui` when empty.
    fs::path static_dir;
};

/// Read-only HTTP view of a run: bundle, per-sample records, thumbnails and
/// byteplots. Everything except full-size byteplots is loaded at construction.
class BundleServer {
public:
    /// Throws malgrid::Error with a diagnostic when the bundle is missing or malformed.
    explicit BundleServer(ServerConfig config);
    ~BundleServer();
    BundleServer(const BundleServer&) = delete;
    BundleServer& operator=(const BundleServer&) = delete;

    std::size_t sample_count() const;

    /// Binds to config.port (0 picks a free port); returns the bound port.
    int bind();
    /// Serves until stop(); call bind() first.
    void listen();
    /// Blocks until listen() is accepting connections on another thread.
    void wait_until_ready() const;
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace malgrid::server
