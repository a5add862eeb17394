#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "moon/notebook.hpp"
#include "moon/session.hpp"

namespace moon {

/// View payload of a session; see docs/protocol.md for the field names.
Json view_json(const Session& session, std::uint64_t version);
Json trace_json(const Session& session);
Json error_json(const std::exception& e);

/// In-memory sessions keyed by unguessable ids. Actions on one session are
/// serialised; distinct sessions proceed independently.
class SessionRegistry {
 public:
  struct Created {
    std::string id;
    Json view;
  };

  explicit SessionRegistry(CompileLimits limits = {});
  ~SessionRegistry();

  /// `notebook` is a notebook object or its serialised text.
  Created create(const Json& notebook, std::string_view script);
  /// Applies {"action": ...}; returns {"view": ..., ["outcome": ...]}.
  Json post_action(const std::string& id, const Json& action);
  Json view(const std::string& id) const;
  Json trace(const std::string& id) const;
  std::uint64_t version(const std::string& id) const;

  /// Blocks until the session version exceeds `since`, the timeout expires
  /// or the registry shuts down. Returns the view on change.
  std::optional<Json> wait_for_update(const std::string& id, std::uint64_t since,
                                      std::chrono::milliseconds timeout) const;

  std::size_t size() const;
  /// Wakes all waiters; later waits return immediately.
  void shutdown();

 private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;

  CompileLimits limits_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::atomic<bool> stopping_{false};
};

/// 128 random bits as 32 hex digits.
std::string new_session_id();

/// HTTP front end for a registry.
class Server {
 public:
  explicit Server(SessionRegistry& registry);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); requires a successful bind().
  bool run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace moon
