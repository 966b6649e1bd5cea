#pragma once

// HTTP + websocket front end for the streaming sessions.
//
//   GET /models            -> {"models": [model_info...]}
//   GET /models?task=NAME  -> one model_info object, 404 if not loaded
//   GET /session (Upgrade) -> websocket carrying the session protocol
//
// One thread per connection; models are shared read-only.

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "session.hpp"

namespace voxclass::service {

namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

using LogFn = std::function<void(const std::string&)>;

namespace detail {

inline std::string query_param(std::string_view target, std::string_view key) {
    const auto q = target.find('?');
    if (q == std::string_view::npos)
        return {};
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
        const auto amp = rest.find('&');
        const std::string_view pair = rest.substr(0, amp);
        const auto eq = pair.find('=');
        if (pair.substr(0, eq) == key)
            return eq == std::string_view::npos ? std::string{} : std::string(pair.substr(eq + 1));
        if (amp == std::string_view::npos)
            break;
        rest.remove_prefix(amp + 1);
    }
    return {};
}

inline std::string_view path_of(std::string_view target) { return target.substr(0, target.find('?')); }

}  // namespace detail

/// Answer a plain HTTP request (everything but the websocket upgrade).
inline http::response<http::string_body> handle_http(const ModelRegistry& registry,
                                                     const http::request<http::string_body>& req) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    const std::string_view target(req.target().data(), req.target().size());
    if (detail::path_of(target) != "/models") {
        res.result(http::status::not_found);
        res.body() = error_frame("not_found", "no such endpoint").dump();
    } else if (req.method() != http::verb::get) {
        res.result(http::status::method_not_allowed);
        res.body() = error_frame("bad_method", "only GET is supported").dump();
    } else {
        const std::string task = detail::query_param(target, "task");
        try {
            res.result(http::status::ok);
            res.body() = (task.empty() ? registry.all_info() : registry.info(task)).dump();
        } catch (const ProtocolError& e) {
            res.result(http::status::not_found);
            res.body() = error_frame(e.code(), e.what()).dump();
        }
    }
    res.prepare_payload();
    return res;
}

class Server {
public:
    Server(const ModelRegistry& registry, const std::string& address, unsigned short port, SessionOptions options = {},
           LogFn log = {})
        : registry_(registry), options_(options), log_(std::move(log)), acceptor_(ioc_) {
        const tcp::endpoint ep(boost::asio::ip::make_address(address), port);
        acceptor_.open(ep.protocol());
        acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
    }

    ~Server() { stop(); }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    /// Accept connections until stop(); blocks the calling thread.
    void run() {
        while (!stopping_) {
            auto socket = std::make_shared<tcp::socket>(ioc_);
            beast::error_code ec;
            acceptor_.accept(*socket, ec);
            if (stopping_)
                break;
            if (ec) {
                log("accept failed: " + ec.message());
                continue;
            }
            std::lock_guard lock(mutex_);
            if (stopping_) {
                socket->close(ec);
                break;
            }
            reap();
            auto done = std::make_shared<std::atomic<bool>>(false);
            workers_.push_back({socket, done, std::thread([this, socket, done] {
                                    serve(*socket);
                                    done->store(true);
                                })});
        }
    }

    /// Close the listener and every live connection, then join their threads.
    void stop() {
        if (stopping_.exchange(true))
            return;
        beast::error_code ec;
        acceptor_.cancel(ec);
        // Unblock accept() by connecting to ourselves, then shut the acceptor.
        try {
            tcp::socket poke(ioc_);
            poke.connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), acceptor_.local_endpoint().port()),
                         ec);
        } catch (...) {
        }
        std::lock_guard lock(mutex_);
        for (auto& w : workers_)
            w.socket->shutdown(tcp::socket::shutdown_both, ec);
        for (auto& w : workers_)
            if (w.thread.joinable())
                w.thread.join();
        workers_.clear();
        acceptor_.close(ec);
    }

private:
    struct Worker {
        std::shared_ptr<tcp::socket> socket;
        std::shared_ptr<std::atomic<bool>> done;
        std::thread thread;
    };

    void log(const std::string& msg) const {
        if (log_)
            log_(msg);
    }

    void reap() {
        for (auto it = workers_.begin(); it != workers_.end();) {
            if (it->done->load()) {
                it->thread.join();
                it = workers_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void serve(tcp::socket& socket) {
        try {
            beast::flat_buffer buffer;
            http::request<http::string_body> req;
            http::read(socket, buffer, req);
            const std::string_view target(req.target().data(), req.target().size());
            if (websocket::is_upgrade(req)) {
                if (detail::path_of(target) != "/session") {
                    http::response<http::string_body> res{http::status::not_found, req.version()};
                    res.body() = error_frame("not_found", "websocket endpoint is /session").dump();
                    res.prepare_payload();
                    http::write(socket, res);
                    return;
                }
                websocket::stream<tcp::socket&> ws(socket);
                ws.accept(req);
                run_session(ws);
                return;
            }
            auto res = handle_http(registry_, req);
            http::write(socket, res);
            beast::error_code ec;
            socket.shutdown(tcp::socket::shutdown_send, ec);
        } catch (const beast::system_error& e) {
            if (e.code() != websocket::error::closed && e.code() != boost::asio::error::eof)
                log(std::string("connection error: ") + e.what());
        } catch (const std::exception& e) {
            log(std::string("connection error: ") + e.what());
        }
    }

    void run_session(websocket::stream<tcp::socket&>& ws) {
        Connection conn(registry_, options_);
        beast::flat_buffer buffer;
        while (true) {
            buffer.clear();
            ws.read(buffer);
            const auto data = buffer.cdata();
            const auto* bytes = static_cast<const std::uint8_t*>(data.data());
            std::vector<nlohmann::json> replies;
            if (ws.got_text())
                replies = conn.on_text(std::string_view(reinterpret_cast<const char*>(bytes), data.size()));
            else
                replies = conn.on_binary(std::span<const std::uint8_t>(bytes, data.size()));
            ws.text(true);
            for (const auto& r : replies)
                ws.write(boost::asio::buffer(r.dump()));
        }
    }

    const ModelRegistry& registry_;
    SessionOptions options_;
    LogFn log_;
    boost::asio::io_context ioc_;
    tcp::acceptor acceptor_;
    std::atomic<bool> stopping_{false};
    std::mutex mutex_;
    std::list<Worker> workers_;
};

}  // namespace voxclass::service
