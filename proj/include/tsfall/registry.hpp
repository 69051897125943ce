#pragma once

// Desk-scale object store. Objects live under <root>/<bucket>/<key>; writes
// go to <root>/.incoming and are renamed into place, so readers only ever see
// complete objects and concurrent writers to one key resolve last-writer-wins.
//
// HTTP/1.1 surface:
//   PUT /{bucket}/{key}          body = object, response ETag = "<sha256 hex>"
//   GET /{bucket}/{key}          404 when absent
//   GET /{bucket}?list&prefix=p  newline-separated keys, lexicographic

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <openssl/sha.h>

#include "tsfall/checkpoint.hpp"
#include "tsfall/codec.hpp"
#include "tsfall/error.hpp"

namespace tsfall::registry {

inline constexpr std::string_view kBuckets[] = {"models", "data"};

struct ObjectKey {
    std::string bucket;
    std::string key;
};

inline bool valid_bucket(std::string_view b) {
    return std::find(std::begin(kBuckets), std::end(kBuckets), b) != std::end(kBuckets);
}

inline void validate_key(const ObjectKey& k) {
    if (!valid_bucket(k.bucket)) throw Error("registry", Errc::BadKey, "unknown bucket '" + k.bucket + "'");
    if (k.key.empty()) throw Error("registry", Errc::BadKey, "empty key");
    if (k.key.front() == '/' || k.key.back() == '/') throw Error("registry", Errc::BadKey, "key may not start or end with '/'");
    std::size_t pos = 0;
    while (pos <= k.key.size()) {
        auto slash = k.key.find('/', pos);
        auto seg = std::string_view(k.key).substr(pos, slash == std::string::npos ? std::string::npos : slash - pos);
        if (seg.empty() || seg == "." || seg == "..") throw Error("registry", Errc::BadKey, "bad segment in '" + k.key + "'");
        if (slash == std::string::npos) break;
        pos = slash + 1;
    }
    for (unsigned char c : k.key)
        if (c < 0x20 || c == '\\' || c == 0x7f) throw Error("registry", Errc::BadKey, "control character or backslash in key");
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : md) {
        out += hex[b >> 4];
        out += hex[b & 15];
    }
    return out;
}

inline std::string read_binary(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("registry", Errc::NotFound, p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Filesystem side of the store; thread-safe through atomic renames.
class ObjectStore {
public:
    explicit ObjectStore(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_ / ".incoming");
        for (auto b : kBuckets) std::filesystem::create_directories(root_ / std::string(b));
    }

    std::string put(const ObjectKey& k, std::string_view bytes) {
        validate_key(k);
        const auto dest = path_of(k);
        std::filesystem::create_directories(dest.parent_path());
        const auto tmp = root_ / ".incoming" / ("obj-" + std::to_string(counter_.fetch_add(1)) + "-" +
                                                std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw Error("registry", Errc::Io, "write " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, dest, ec);
        if (ec) throw Error("registry", Errc::Io, "rename " + dest.string() + ": " + ec.message());
        return sha256_hex(bytes);
    }

    std::optional<std::string> get(const ObjectKey& k) const {
        validate_key(k);
        const auto p = path_of(k);
        if (!std::filesystem::is_regular_file(p)) return std::nullopt;
        return read_binary(p);
    }

    std::vector<std::string> list(const std::string& bucket, const std::string& prefix) const {
        if (!valid_bucket(bucket)) throw Error("registry", Errc::BadKey, "unknown bucket '" + bucket + "'");
        std::vector<std::string> keys;
        const auto base = root_ / bucket;
        for (const auto& e : std::filesystem::recursive_directory_iterator(base)) {
            if (!e.is_regular_file()) continue;
            auto rel = std::filesystem::relative(e.path(), base).generic_string();
            if (rel.rfind(prefix, 0) == 0) keys.push_back(std::move(rel));
        }
        std::sort(keys.begin(), keys.end());
        return keys;
    }

private:
    std::filesystem::path path_of(const ObjectKey& k) const { return root_ / k.bucket / k.key; }

    std::filesystem::path root_;
    std::atomic<std::uint64_t> counter_{0};
};

class Server {
public:
    explicit Server(std::filesystem::path root) : store_(std::move(root)) {
        svr_.Put(R"(/([^/]+)/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto etag = store_.put({req.matches[1], req.matches[2]}, req.body);
                res.set_header("ETag", "\"" + etag + "\"");
                res.status = 200;
            } catch (const Error& e) {
                fail(res, e);
            }
        });
        svr_.Get(R"(/([^/]+)/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                auto data = store_.get({req.matches[1], req.matches[2]});
                if (!data) {
                    res.status = 404;
                    res.set_content("not found", "text/plain");
                    return;
                }
                res.set_header("ETag", "\"" + sha256_hex(*data) + "\"");
                res.set_content(std::move(*data), "application/octet-stream");
            } catch (const Error& e) {
                fail(res, e);
            }
        });
        svr_.Get(R"(/([^/]+)/?)", [this](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("list")) {
                res.status = 400;
                return;
            }
            try {
                std::string body;
                for (const auto& k : store_.list(req.matches[1], req.get_param_value("prefix"))) body += k + "\n";
                res.set_content(body, "text/plain");
            } catch (const Error& e) {
                fail(res, e);
            }
        });
    }

    ~Server() { stop(); }
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        port_ = port == 0 ? svr_.bind_to_any_port(host) : (svr_.bind_to_port(host, port) ? port : -1);
        if (port_ < 0) throw Error("registry", Errc::Transport, "cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
        return port_;
    }

    // Serves on the calling thread until stop() is called elsewhere.
    void run(const std::string& host, int port) {
        if (!svr_.listen(host, port)) throw Error("registry", Errc::Transport, "cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        svr_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }
    ObjectStore& store() { return store_; }

private:
    static void fail(httplib::Response& res, const Error& e) {
        res.status = e.code() == Errc::BadKey ? 400 : 500;
        res.set_content(e.what(), "text/plain");
    }

    ObjectStore store_;
    httplib::Server svr_;
    std::thread thread_;
    int port_ = -1;
};

struct Address {
    std::string host = "127.0.0.1";
    int port = 9000;

    // "host:port" or "http://host:port".
    static Address parse(std::string s) {
        if (s.rfind("http://", 0) == 0) s = s.substr(7);
        while (!s.empty() && s.back() == '/') s.pop_back();
        Address a;
        auto colon = s.rfind(':');
        if (colon == std::string::npos || colon == 0) throw Error("registry", Errc::Transport, "address must be host:port, got '" + s + "'");
        a.host = s.substr(0, colon);
        try {
            a.port = std::stoi(s.substr(colon + 1));
        } catch (...) {
            throw Error("registry", Errc::Transport, "bad port in '" + s + "'");
        }
        return a;
    }
    std::string str() const { return host + ":" + std::to_string(port); }
};

inline constexpr const char* kAddressEnv = "TSFALL_REGISTRY";

class Client {
public:
    explicit Client(Address addr) : addr_(std::move(addr)), cli_(addr_.host, addr_.port) {
        cli_.set_connection_timeout(5, 0);
        cli_.set_read_timeout(30, 0);
        cli_.set_write_timeout(30, 0);
    }

    std::string put_object(const ObjectKey& k, std::string_view bytes) {
        validate_key(k);
        auto res = cli_.Put(path(k), bytes.data(), bytes.size(), "application/octet-stream");
        check(res, k);
        return strip_quotes(res->get_header_value("ETag"));
    }

    std::string get_object(const ObjectKey& k) {
        validate_key(k);
        auto res = cli_.Get(path(k));
        check(res, k);
        return res->body;
    }

    std::vector<std::string> list(const std::string& bucket, const std::string& prefix = "") {
        if (!valid_bucket(bucket)) throw Error("registry", Errc::BadKey, "unknown bucket '" + bucket + "'");
        httplib::Params params{{"list", ""}, {"prefix", prefix}};
        auto res = cli_.Get("/" + bucket, params, httplib::Headers{});
        check(res, {bucket, prefix});
        std::vector<std::string> keys;
        std::size_t pos = 0;
        const auto& b = res->body;
        while (pos < b.size()) {
            auto nl = b.find('\n', pos);
            if (nl == std::string::npos) nl = b.size();
            if (nl > pos) keys.push_back(b.substr(pos, nl - pos));
            pos = nl + 1;
        }
        return keys;
    }

    // Uploads every regular file of a session directory under data/<session-id>/.
    std::vector<std::string> push_session(const std::filesystem::path& dir, std::string session_id = {}) {
        if (session_id.empty()) session_id = dir.filename().string();
        if (session_id.empty()) session_id = dir.parent_path().filename().string();
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        std::vector<std::string> keys;
        for (const auto& f : files) {
            ObjectKey k{"data", session_id + "/" + f.filename().string()};
            put_object(k, read_binary(f));
            keys.push_back(k.key);
        }
        return keys;
    }

    // Stores models/<name>.ckpt and a models/<name>.manifest carrying the
    // publication timestamp used to pick the newest model.
    std::string push_model(const std::filesystem::path& ckpt, std::int64_t timestamp_ms, std::string name = {}) {
        if (name.empty()) name = ckpt.stem().string();
        const auto bytes = read_binary(ckpt);
        const auto etag = put_object({"models", name + ".ckpt"}, bytes);
        const std::string manifest = "timestamp_ms=" + std::to_string(timestamp_ms) + "\ncheckpoint=" + name +
                                     ".ckpt\nsha256=" + etag + "\n";
        put_object({"models", name + ".manifest"}, manifest);
        return etag;
    }

    struct PulledModel {
        std::string key;
        std::int64_t timestamp_ms = 0;
        std::filesystem::path path;
    };

    // Fetches the newest checkpoint, verifies its CRC and installs it at
    // `dest` by rename. On any failure `dest` is left as it was.
    PulledModel pull_latest_model(const std::filesystem::path& dest) {
        std::optional<PulledModel> best;
        for (const auto& key : list("models")) {
            if (key.size() < 9 || key.compare(key.size() - 9, 9, ".manifest") != 0) continue;
            const auto body = get_object({"models", key});
            std::int64_t ts = 0;
            std::string ckpt;
            std::size_t pos = 0;
            while (pos < body.size()) {
                auto nl = body.find('\n', pos);
                if (nl == std::string::npos) nl = body.size();
                const auto line = body.substr(pos, nl - pos);
                if (line.rfind("timestamp_ms=", 0) == 0) ts = std::stoll(line.substr(13));
                else if (line.rfind("checkpoint=", 0) == 0) ckpt = line.substr(11);
                pos = nl + 1;
            }
            if (ckpt.empty()) continue;
            if (!best || ts > best->timestamp_ms || (ts == best->timestamp_ms && ckpt > best->key)) best = PulledModel{ckpt, ts, dest};
        }
        if (!best) throw Error("registry", Errc::NoModels, "");
        const auto bytes = get_object({"models", best->key});
        checkpoint::decode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
        if (!dest.parent_path().empty()) std::filesystem::create_directories(dest.parent_path());
        codec::write_text_atomic(dest, bytes, "registry");
        return *best;
    }

    const Address& address() const { return addr_; }

private:
    static std::string path(const ObjectKey& k) { return "/" + k.bucket + "/" + k.key; }
    static std::string strip_quotes(std::string s) {
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        return s;
    }
    void check(const httplib::Result& res, const ObjectKey& k) {
        if (!res)
            throw Error("registry", Errc::Transport, addr_.str() + ": " + httplib::to_string(res.error()));
        if (res->status == 404) throw Error("registry", Errc::NotFound, k.bucket + "/" + k.key);
        if (res->status == 400) throw Error("registry", Errc::BadKey, res->body);
        if (res->status != 200) throw Error("registry", Errc::Transport, "HTTP " + std::to_string(res->status) + ": " + res->body);
    }

    Address addr_;
    httplib::Client cli_;
};

} // namespace tsfall::registry
