#pragma once
// JSON-over-HTTP API consumed by the review console.

#include "latticework/engine.hpp"

#include <memory>
#include <string>

namespace lw {

class Service {
public:
    explicit Service(Engine& engine);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Blocks until stop(). Returns false if the socket could not be bound.
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port and serves on a background thread.
    int start_background(const std::string& host = "127.0.0.1");
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace lw
