#include "toporig/service.hpp"

#include <httplib.h>

#include <iostream>

namespace toporig {

using nlohmann::json;

struct HttpServer::Impl {
    ServiceCore& core;
    httplib::Server server;
    explicit Impl(ServiceCore& c) : core(c) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, std::string("request body is not valid JSON: ") + e.what());
    }
}

template <class F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_json(res, http_status(e.code()), error_body(e));
        } catch (const std::exception& e) {
            send_json(res, 500, error_body(Error(ErrorCode::Io, e.what())));
        }
    };
}

} // namespace

HttpServer::HttpServer(ServiceCore& core) : impl_(std::make_unique<Impl>(core)) {
    auto& s = impl_->server;
    ServiceCore& c = impl_->core;
    s.set_payload_max_length(c.config().max_upload_bytes * 2);
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS"}});
    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Post("/sessions", guarded([&c](const httplib::Request& req, httplib::Response& res) {
        const std::string type = req.get_header_value("Content-Type");
        if (type.rfind("image/", 0) == 0 || type == "application/octet-stream") {
            const auto* p = reinterpret_cast<const std::uint8_t*>(req.body.data());
            send_json(res, 201, c.session_info(c.create_session({p, req.body.size()})));
        } else {
            send_json(res, 201, c.handle_create(parse_body(req)));
        }
    }));
    s.Get(R"(/sessions/([0-9A-Za-z_-]+))", guarded([&c](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, c.session_info(req.matches[1]));
    }));
    s.Get(R"(/sessions/([0-9A-Za-z_-]+)/annotations)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, c.get_annotations(req.matches[1]));
    }));
    s.Put(R"(/sessions/([0-9A-Za-z_-]+)/annotations)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, c.handle_put_annotations(req.matches[1], parse_body(req)));
    }));
    s.Post(R"(/sessions/([0-9A-Za-z_-]+)/preview)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, c.handle_preview(req.matches[1], parse_body(req)));
    }));
    s.Post(R"(/sessions/([0-9A-Za-z_-]+)/export)", guarded([&c](const httplib::Request& req, httplib::Response& res) {
        const auto tar = c.handle_export(req.matches[1], parse_body(req));
        res.status = 200;
        res.set_header("Content-Disposition", "attachment; filename=\"bundle.tar\"");
        res.set_content(std::string(tar.begin(), tar.end()), "application/x-tar");
    }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

} // namespace toporig
