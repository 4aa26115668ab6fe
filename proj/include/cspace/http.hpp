#ifndef CSPACE_HTTP_HPP
#define CSPACE_HTTP_HPP

#include "cspace/error.hpp"
#include "cspace/service.hpp"

#include <memory>
#include <string>

namespace cspace {

/// HTTP status for a library error kind.
int http_status(ErrorKind kind);

/**
 * JSON API over a SessionManager. Errors come back as
 * {"error": <kind>, "message": <text>} with the status from http_status.
 */
class HttpServer {
public:
    explicit HttpServer(SessionManager& sessions);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Blocks until stop(). Returns false when the port cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds a free port and returns it, or -1.
    int bind_any(const std::string& host);
    /// Serves on the port taken by bind_any; blocks until stop().
    bool serve();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cspace

#endif
