#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "rolekit/error.hpp"
#include "rolekit/service/session_service.hpp"

namespace rolekit::service {

int http_status_for(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::input:
    case ErrorCode::config:
        return 400;
    case ErrorCode::not_found:
        return 404;
    case ErrorCode::busy:
        return 429;
    case ErrorCode::transport:
    case ErrorCode::backend:
    case ErrorCode::parse:
    case ErrorCode::extraction:
        return 502;
    case ErrorCode::script_miss:
    case ErrorCode::load:
    case ErrorCode::internal:
        return 500;
    }
    return 500;
}

nlohmann::ordered_json error_body(const Error& error) {
    nlohmann::ordered_json j;
    j["code"] = error_code_name(error.code());
    j["message"] = error.what();
    return j;
}

namespace {

constexpr const char* kJson = "application/json; charset=utf-8";

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

nlohmann::json parse_body(const httplib::Request& req, bool required) {
    if (req.body.empty()) {
        if (required) {
            throw InputError("request body must be a JSON object");
        }
        return nlohmann::json::object();
    }
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw InputError("request body must be a JSON object");
    }
    return j;
}

std::string string_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
        throw InputError(std::string("request body needs a string \"") + key + "\"");
    }
    return j.at(key).get<std::string>();
}

template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const pipeline::TurnError& e) {
            auto body = error_body(e);
            body["trace_id"] = e.partial_trace().trace_id;
            send_json(res, http_status_for(e.code()), body);
        } catch (const Error& e) {
            send_json(res, http_status_for(e.code()), error_body(e));
        } catch (const std::exception& e) {
            send_json(res, 500, error_body(InternalError(e.what())));
        }
    };
}

nlohmann::ordered_json summary_json(const PersonaSummary& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["source_book"] = s.source_book;
    j["utterances"] = s.utterances;
    j["has_memory"] = s.has_memory;
    return j;
}

} // namespace

struct HttpServer::Impl {
    explicit Impl(SessionService& s) : service(s) {}

    SessionService& service;
    httplib::Server server;
    bool bound = false;
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& svr = impl_->server;
    auto& svc = impl_->service;
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    svr.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    }));
    svr.Get("/personas", guarded([&svc](const httplib::Request&, httplib::Response& res) {
        auto list = nlohmann::ordered_json::array();
        for (const auto& p : svc.list_personas()) {
            list.push_back(summary_json(p));
        }
        send_json(res, 200, list);
    }));
    svr.Get(R"(/personas/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, svc.get_persona(req.matches[1]));
    }));
    svr.Put(R"(/personas/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, svc.update_persona(req.matches[1], parse_body(req, true)));
    }));
    svr.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req, true);
        const auto config = body.contains("config") ? body.at("config") : nlohmann::json();
        send_json(res, 201, session_to_json(svc.create_session(string_field(body, "persona"), config)));
    }));
    svr.Get(R"(/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, session_to_json(svc.get_session(req.matches[1])));
    }));
    svr.Post(R"(/sessions/([^/]+)/messages)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req, true);
        const auto text = string_field(body, "text");
        const std::string id = req.matches[1];
        if (body.contains("config") && !body.at("config").is_null()) {
            svc.update_session_config(id, body.at("config"));
        }
        send_json(res, 200, pipeline::trace_to_json(svc.post_message(id, text)));
    }));
    svr.Get(R"(/traces/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, pipeline::trace_to_json(svc.get_trace(req.matches[1])));
    }));
    svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) {
            return;
        }
        const auto code = res.status == 404 ? ErrorCode::not_found : ErrorCode::input;
        send_json(res, res.status,
                  error_body(Error(code, "no route for " + req.method + " " + req.path)));
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& svr = impl_->server;
    int bound_port = port;
    if (port == 0) {
        bound_port = svr.bind_to_any_port(host);
        if (bound_port < 0) {
            throw ConfigError("cannot bind " + host + " on any port");
        }
    } else if (!svr.bind_to_port(host, port)) {
        throw ConfigError("cannot bind " + host + ":" + std::to_string(port) + " (address in use or not permitted)");
    }
    impl_->bound = true;
    return bound_port;
}

void HttpServer::listen() {
    if (!impl_->bound) {
        throw ConfigError("server must be bound before listening");
    }
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

} // namespace rolekit::service
