#pragma once

#include <csignal>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "occam/codec.hpp"
#include "occam/embedding.hpp"
#include "occam/error.hpp"
#include "occam/io.hpp"
#include "occam/prompting.hpp"

// Client side of the model-server protocol: newline-delimited JSON over a
// child process's stdin/stdout, or JSON bodies POSTed to /v1/<op>.
//
//   hello   {"op":"hello"} -> {"caps":{"segment":true,"embed":true,
//                                      "embed_dim":2048,"deterministic":true}}
//   segment {"id","op":"segment","image":{"png_b64"},"points":[[x,y],...]}
//           -> {"id","masks":[{"point_index","rle","score"},...]}
//   embed   {"id","op":"embed","patch":{"png_b64"}} -> {"id","vector":[...]}
//
// A response carrying "error" is a fatal per-request failure.

namespace occam::wire {

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws ProviderError(retryable) on transport failure.
  virtual nlohmann::json call(const nlohmann::json& request) = 0;
  // Drops the connection; the next call reconnects.
  virtual void reset() = 0;
  virtual std::string describe() const = 0;
};

class SubprocessTransport final : public Transport {
 public:
  explicit SubprocessTransport(std::string command) : command_(std::move(command)) {
    std::signal(SIGPIPE, SIG_IGN);
  }
  ~SubprocessTransport() override { stop(); }
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  nlohmann::json call(const nlohmann::json& request) override {
    if (pid_ < 0) start();
    const std::string line = request.dump() + "\n";
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::write(to_child_, line.data() + sent, line.size() - sent);
      if (n <= 0) {
        stop();
        throw ProviderError("wire: write to '" + command_ + "' failed", true);
      }
      sent += static_cast<std::size_t>(n);
    }
    const auto reply = read_line();
    if (!reply) {
      stop();
      throw ProviderError("wire: '" + command_ + "' closed its output", true);
    }
    try {
      return nlohmann::json::parse(*reply);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(std::string("wire: malformed response: ") + e.what(), false);
    }
  }

  void reset() override { stop(); }
  std::string describe() const override { return "subprocess '" + command_ + "'"; }

 private:
  void start() {
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
      throw ProviderError("wire: pipe() failed", true);
    const pid_t pid = ::fork();
    if (pid < 0) throw ProviderError("wire: fork() failed", true);
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
  }

  void stop() {
    if (pid_ < 0) return;
    ::close(to_child_);
    ::close(from_child_);
    int status = 0;
    if (::waitpid(pid_, &status, WNOHANG) == 0) {
      ::kill(pid_, SIGTERM);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
    to_child_ = from_child_ = -1;
  }

  std::optional<std::string> read_line() {
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string url) : url_(std::move(url)) {}

  nlohmann::json call(const nlohmann::json& request) override {
    if (!client_) {
      client_ = std::make_unique<httplib::Client>(url_);
      client_->set_read_timeout(600, 0);
    }
    const std::string op = request.value("op", "");
    auto res = client_->Post("/v1/" + op, request.dump(), "application/json");
    if (!res) {
      client_.reset();
      throw ProviderError("wire: HTTP request to " + url_ + " failed: " +
                              httplib::to_string(res.error()),
                          true);
    }
    if (res->status != 200)
      throw ProviderError("wire: HTTP " + std::to_string(res->status) + " from " + url_, false);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(std::string("wire: malformed response: ") + e.what(), false);
    }
  }

  void reset() override { client_.reset(); }
  std::string describe() const override { return "http " + url_; }

 private:
  std::string url_;
  std::unique_ptr<httplib::Client> client_;
};

struct ServerCaps {
  bool segment = false;
  bool embed = false;
  int embed_dim = 0;
  bool deterministic = false;
};

// One connection to a model server; requests are serialized.
class Session {
 public:
  explicit Session(std::unique_ptr<Transport> transport, int max_retries = 2)
      : transport_(std::move(transport)), max_retries_(max_retries) {}

  static std::shared_ptr<Session> connect(const std::string& target, int max_retries = 2) {
    std::unique_ptr<Transport> t;
    if (target.rfind("http://", 0) == 0 || target.rfind("https://", 0) == 0)
      t = std::make_unique<HttpTransport>(target);
    else
      t = std::make_unique<SubprocessTransport>(target);
    return std::make_shared<Session>(std::move(t), max_retries);
  }

  ServerCaps caps() {
    std::lock_guard lock(mu_);
    return caps_locked();
  }

  std::vector<RawMask> segment(const Image& img, std::span<const SeedPoint> points) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) pts.push_back({p.x, p.y});
    nlohmann::json req = {{"op", "segment"},
                          {"image", {{"png_b64", codec::base64_encode(io::encode_png(img))}}},
                          {"points", pts}};
    std::lock_guard lock(mu_);
    if (!caps_locked().segment) throw ProviderError("wire: server does not offer segment", false);
    const auto res = request_locked(std::move(req));
    if (!res.contains("masks")) throw ProviderError("wire: segment response lacks 'masks'", false);
    return masks_from_json(res.at("masks"), img.width(), img.height());
  }

  std::vector<double> embed(const Image& patch) {
    nlohmann::json req = {{"op", "embed"},
                          {"patch", {{"png_b64", codec::base64_encode(io::encode_png(patch))}}}};
    std::lock_guard lock(mu_);
    const ServerCaps caps = caps_locked();
    if (!caps.embed) throw ProviderError("wire: server does not offer embed", false);
    const auto res = request_locked(std::move(req));
    if (!res.contains("vector") || !res.at("vector").is_array())
      throw ProviderError("wire: embed response lacks 'vector'", false);
    std::vector<double> v;
    try {
      v = res.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("wire: bad vector: ") + e.what(), false);
    }
    if (static_cast<int>(v.size()) != caps.embed_dim)
      throw ProviderError("wire: embed returned dimension " + std::to_string(v.size()) +
                              ", handshake declared " + std::to_string(caps.embed_dim),
                          false);
    return v;
  }

 private:
  ServerCaps caps_locked() {
    if (caps_) return *caps_;
    const auto res = call_with_retry({{"op", "hello"}});
    if (!res.contains("caps") || !res.at("caps").is_object())
      throw ProviderError("wire: handshake with " + transport_->describe() + " failed", false);
    const auto& c = res.at("caps");
    ServerCaps caps;
    caps.segment = c.value("segment", false);
    caps.embed = c.value("embed", false);
    caps.embed_dim = c.value("embed_dim", 0);
    caps.deterministic = c.value("deterministic", false);
    if (caps.embed && caps.embed_dim < 1)
      throw ProviderError("wire: handshake declares embed without a dimension", false);
    caps_ = caps;
    return caps;
  }

  nlohmann::json request_locked(nlohmann::json req) {
    const std::string id = "r" + std::to_string(++next_id_);
    req["id"] = id;
    auto res = call_with_retry(req);
    if (res.contains("error"))
      throw ProviderError("wire: server error for " + id + ": " + res.at("error").dump(), false);
    if (res.value("id", "") != id)
      throw ProviderError("wire: response id mismatch (expected " + id + ")", false);
    return res;
  }

  nlohmann::json call_with_retry(const nlohmann::json& req) {
    for (int attempt = 0;; ++attempt) {
      try {
        return transport_->call(req);
      } catch (const ProviderError& e) {
        if (!e.retryable() || attempt >= max_retries_) throw;
        transport_->reset();
      }
    }
  }

  std::unique_ptr<Transport> transport_;
  int max_retries_;
  std::mutex mu_;
  std::optional<ServerCaps> caps_;
  unsigned long long next_id_ = 0;
};

class WireSegmentationProvider final : public SegmentationProvider {
 public:
  explicit WireSegmentationProvider(std::shared_ptr<Session> s) : session_(std::move(s)) {}
  ProviderCaps caps() const override {
    return {kMaxMasksPerPoint, true, session_->caps().deterministic, true};
  }
  std::vector<RawMask> segment_points(const Image& img, std::span<const SeedPoint> points,
                                      std::string_view) override {
    return session_->segment(img, points);
  }

 private:
  std::shared_ptr<Session> session_;
};

class WireEmbedder final : public Embedder {
 public:
  explicit WireEmbedder(std::shared_ptr<Session> s) : session_(std::move(s)) {}
  EmbedderInfo info() const override {
    EmbedderInfo i;
    i.dimension = session_->caps().embed_dim;
    i.serialized = true;
    return i;
  }
  std::vector<double> embed_crop(const Image& crop) override { return session_->embed(crop); }

 private:
  std::shared_ptr<Session> session_;
};

}  // namespace occam::wire
