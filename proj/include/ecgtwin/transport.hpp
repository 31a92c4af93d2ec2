#pragma once

// Stream-socket replacement for the serial radio link. The server writes
// frame bytes to a single client on a fixed schedule; the client turns the
// byte stream back into frames. There is no framing beyond the frames'
// own '\n' delimiters.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ecgtwin/wire.hpp"

namespace ecgtwin {

inline constexpr std::uint16_t default_port = 7660;

struct Endpoint {
    std::string host;
    std::uint16_t port = default_port;

    std::string to_string() const { return (host.empty() ? std::string("*") : host) + ":" + std::to_string(port); }
};

/// Accepts "host:port", ":port" or "host". An empty host means any address
/// when serving and loopback when connecting.
inline Endpoint parse_endpoint(const std::string& text) {
    Endpoint ep;
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) {
        ep.host = text;
        return ep;
    }
    ep.host = text.substr(0, colon);
    const std::string port = text.substr(colon + 1);
    if (port.empty()) throw std::invalid_argument("endpoint '" + text + "': missing port");
    std::size_t used = 0;
    unsigned long p = 0;
    try {
        p = std::stoul(port, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != port.size() || p > 65535) throw std::invalid_argument("endpoint '" + text + "': bad port");
    ep.port = static_cast<std::uint16_t>(p);
    return ep;
}

namespace detail {

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    void reset() noexcept {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

inline std::string errno_text(int err) { return std::strerror(err); }

struct AddrInfoDeleter {
    void operator()(addrinfo* a) const { ::freeaddrinfo(a); }
};

inline std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const char* host = ep.host.empty() ? (passive ? nullptr : "127.0.0.1") : ep.host.c_str();
    const std::string port = std::to_string(ep.port);
    const int rc = ::getaddrinfo(host, port.c_str(), &hints, &res);
    if (rc != 0) throw std::runtime_error("resolve " + ep.to_string() + ": " + ::gai_strerror(rc));
    return std::unique_ptr<addrinfo, AddrInfoDeleter>(res);
}

inline bool send_all(int fd, const char* data, std::size_t len) {
    while (len > 0) {
        const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace detail

/// Produces the next chunk of bytes to send; nullopt ends the session.
using ChunkSource = std::function<std::optional<std::string>()>;

/// Splits a byte buffer into frame-sized chunks (the last may be shorter).
inline ChunkSource chunks_from_bytes(std::string bytes, std::size_t chunk = Frame::wire_size) {
    auto buf = std::make_shared<std::string>(std::move(bytes));
    auto pos = std::make_shared<std::size_t>(0);
    return [buf, pos, chunk]() -> std::optional<std::string> {
        if (*pos >= buf->size()) return std::nullopt;
        std::string out = buf->substr(*pos, chunk);
        *pos += out.size();
        return out;
    };
}

struct ServeStats {
    std::uint64_t chunks_sent = 0;
    std::uint64_t bytes_sent = 0;
    bool client_disconnected = false;
    bool stopped = false;
    /// Send time of each chunk, seconds after the first send.
    std::vector<double> send_offsets_s;
};

/// Paced single-client server. Binding happens at construction so the
/// port is known (pass port 0 for an ephemeral one). The listener closes as
/// soon as a client is accepted, so later clients are refused.
class ReplayServer {
public:
    explicit ReplayServer(const Endpoint& ep) : endpoint_(ep) {
        auto ai = detail::resolve(ep, true);
        detail::Fd fd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!fd) throw std::runtime_error("socket for " + ep.to_string() + ": " + detail::errno_text(errno));
        int yes = 1;
        ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        if (::bind(fd.get(), ai->ai_addr, ai->ai_addrlen) != 0)
            throw std::runtime_error("bind " + ep.to_string() + ": " + detail::errno_text(errno));
        if (::listen(fd.get(), 1) != 0)
            throw std::runtime_error("listen " + ep.to_string() + ": " + detail::errno_text(errno));
        sockaddr_in addr{};
        socklen_t len = sizeof addr;
        ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        listener_ = std::move(fd);
    }

    std::uint16_t port() const noexcept { return port_; }
    Endpoint endpoint() const { return {endpoint_.host, port_}; }

    /// Waits for one client, then sends one chunk every 1/rate seconds on an
    /// absolute schedule. Returns when the source is exhausted, the client
    /// goes away, or stop() is called. The connection is closed on return.
    ServeStats serve(const ChunkSource& next, double chunks_per_second) {
        if (!(chunks_per_second > 0.0)) throw std::invalid_argument("ReplayServer: rate must be positive");
        ServeStats st;
        detail::Fd client = accept_one();
        if (!client) {
            st.stopped = true;
            return st;
        }
        int yes = 1;
        ::setsockopt(client.get(), IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);

        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration<double>(1.0 / chunks_per_second);
        const auto t0 = clock::now();
        for (std::uint64_t i = 0;; ++i) {
            if (stop_.load()) {
                st.stopped = true;
                break;
            }
            auto chunk = next();
            if (!chunk) break;
            const auto due = t0 + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(i));
            std::this_thread::sleep_until(due);
            if (stop_.load()) {
                st.stopped = true;
                break;
            }
            if (!detail::send_all(client.get(), chunk->data(), chunk->size())) {
                st.client_disconnected = true;
                break;
            }
            st.send_offsets_s.push_back(std::chrono::duration<double>(clock::now() - t0).count());
            ++st.chunks_sent;
            st.bytes_sent += chunk->size();
        }
        ::shutdown(client.get(), SHUT_RDWR);
        return st;
    }

    /// Safe to call from another thread.
    void stop() { stop_.store(true); }

private:
    detail::Fd accept_one() {
        while (!stop_.load()) {
            pollfd p{listener_.get(), POLLIN, 0};
            const int rc = ::poll(&p, 1, 50);
            if (rc < 0 && errno != EINTR)
                throw std::runtime_error("poll " + endpoint().to_string() + ": " + detail::errno_text(errno));
            if (rc <= 0) continue;
            detail::Fd c(::accept(listener_.get(), nullptr, nullptr));
            if (!c) {
                if (errno == EINTR) continue;
                throw std::runtime_error("accept " + endpoint().to_string() + ": " + detail::errno_text(errno));
            }
            listener_.reset();
            return c;
        }
        return {};
    }

    Endpoint endpoint_;
    std::uint16_t port_ = 0;
    detail::Fd listener_;
    std::atomic<bool> stop_{false};
};

/// Pull-based frame source over a connection. End of stream (peer close or
/// error) ends iteration; stats stay available afterwards.
class ReplayClient {
public:
    static ReplayClient connect(const Endpoint& ep) {
        auto ai = detail::resolve(ep, false);
        detail::Fd fd(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!fd) throw std::runtime_error("socket for " + ep.to_string() + ": " + detail::errno_text(errno));
        if (::connect(fd.get(), ai->ai_addr, ai->ai_addrlen) != 0)
            throw std::runtime_error("connect " + ep.to_string() + ": " + detail::errno_text(errno));
        return ReplayClient(std::move(fd));
    }

    /// Like connect(), retrying refused connections until `timeout` passes.
    static ReplayClient connect_retry(const Endpoint& ep, std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            try {
                return connect(ep);
            } catch (const std::runtime_error&) {
                if (std::chrono::steady_clock::now() >= deadline) throw;
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            }
        }
    }

    std::optional<Frame> next() {
        while (pending_.empty()) {
            if (!read_more()) return std::nullopt;
        }
        Frame f = pending_.front();
        pending_.pop_front();
        return f;
    }

    /// Appends whatever arrives in one read; false once the stream ended and
    /// nothing was appended.
    bool read_some(std::vector<Frame>& out) {
        if (!pending_.empty()) {
            out.insert(out.end(), pending_.begin(), pending_.end());
            pending_.clear();
            return true;
        }
        const auto before = out.size();
        while (out.size() == before) {
            if (eof_) return false;
            recv_into(out);
        }
        return true;
    }

    const StreamStats& stats() const noexcept { return parser_.stats(); }
    bool at_end() const noexcept { return eof_ && pending_.empty(); }

private:
    explicit ReplayClient(detail::Fd fd) : fd_(std::move(fd)) {}

    bool read_more() {
        if (eof_) return false;
        std::vector<Frame> frames;
        recv_into(frames);
        pending_.insert(pending_.end(), frames.begin(), frames.end());
        return !pending_.empty() || !eof_;
    }

    void recv_into(std::vector<Frame>& out) {
        char buf[4096];
        for (;;) {
            const ssize_t n = ::recv(fd_.get(), buf, sizeof buf, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                eof_ = true;
                fd_.reset();
                return;
            }
            parser_.feed(std::string_view(buf, static_cast<std::size_t>(n)), out);
            return;
        }
    }

    detail::Fd fd_;
    StreamParser parser_;
    std::deque<Frame> pending_;
    bool eof_ = false;
};

/// Worst relative deviation, over every run of `window` consecutive chunk
/// intervals, between the observed and nominal duration of that run.
inline double worst_window_pacing_error(const std::vector<double>& send_offsets_s, double rate_hz, std::size_t window) {
    if (window == 0 || send_offsets_s.size() <= window) return 0.0;
    const double nominal = static_cast<double>(window) / rate_hz;
    double worst = 0.0;
    for (std::size_t i = 0; i + window < send_offsets_s.size(); ++i) {
        const double actual = send_offsets_s[i + window] - send_offsets_s[i];
        worst = std::max(worst, std::abs(actual - nominal) / nominal);
    }
    return worst;
}

}  // namespace ecgtwin
