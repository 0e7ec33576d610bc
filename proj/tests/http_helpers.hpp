#pragma once

#include <functional>
#include <string>
#include <thread>

#include "httplib.h"

namespace testutil {

// In-process HTTP server bound to an ephemeral port. Register handlers on
// `server` before calling start().
class StubServer {
public:
    StubServer() = default;
    ~StubServer() { stop(); }

    void start() {
        port_ = server.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    void stop() {
        if (thread_.joinable()) {
            server.stop();
            thread_.join();
        }
    }

    int port() const { return port_; }
    std::string url() const {
        return "http://127.0.0.1:" + std::to_string(port_);
    }

    httplib::Server server;

private:
    int port_ = 0;
    std::thread thread_;
};

} // namespace testutil
