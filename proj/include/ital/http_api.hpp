#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "ital/service.hpp"

namespace ital {

/// JSON-over-HTTP front end for FeedbackService. Routes live under /api,
/// images under /images, and an optional static directory is served at /.
class HttpApi {
public:
    explicit HttpApi(FeedbackService& service, std::filesystem::path static_dir = {});
    ~HttpApi();

    HttpApi(const HttpApi&) = delete;
    HttpApi& operator=(const HttpApi&) = delete;

    /// Binds to host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ital
