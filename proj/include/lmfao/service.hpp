#pragma once

#include "lmfao/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

namespace lmfao {

struct Response
{
    int status = 200;
    nlohmann::json body;
};

/** The HTTP endpoints as a plain request handler over one session.
 *
 * Every response carries the session generation, which advances on each mutating request. A request passing
 * `?generation=N` for an older generation gets 409; so does asking for results that a mutation invalidated. */
class Service
{
    struct Session;
    std::unique_ptr<Session> session_;
    ExecOptions options_;
    std::uint64_t generation_ = 0;
    mutable std::shared_mutex mutex_;

    Response create_session(const nlohmann::json &body);
    Response jointree() const;
    Response views(const std::map<std::string, std::string> &params) const;
    Response reassign(const std::string &query, const nlohmann::json &body);
    Response groups() const;
    Response group_code(const std::string &id) const;
    Response run(const nlohmann::json &body);
    Response assign(const nlohmann::json &body) const;
    Response metrics() const;

    public:
    explicit Service(ExecOptions options = {});
    ~Service();

    /// `target` is the path with an optional query string.
    Response handle(const std::string &method, const std::string &target, const std::string &body);
};

/// Blocks serving `service` on the port; static files from `static_dir` when given.
void serve(Service &service, int port, const std::filesystem::path &static_dir = {});

} // namespace lmfao
