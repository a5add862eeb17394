#include "moon/service.hpp"

#include <condition_variable>
#include <random>

#include <httplib.h>

#include "moon/error.hpp"

namespace moon {

namespace {

const char* kind_name(CellKind k) { return k == CellKind::Code ? "code" : "text"; }

CellKind parse_kind(const Json& v) {
  if (v == "code") return CellKind::Code;
  if (v == "text" || v == "markdown") return CellKind::Text;
  throw Error(ErrorCode::InvalidArgument, "kind must be \"code\" or \"text\"");
}

std::size_t parse_position(const Json& action) {
  auto it = action.find("position");
  if (it == action.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0)
    throw Error(ErrorCode::InvalidArgument, "action needs a non-negative integer \"position\"");
  return it->get<std::size_t>();
}

}  // namespace

Json view_json(const Session& session, std::uint64_t version) {
  const auto colors = session.colors();
  const auto last = session.last_executed_position();
  Json cells = Json::array();
  for (std::size_t pos = 0; pos < session.doc().size(); ++pos) {
    const Cell& cell = session.doc().cell(pos);
    const CellRef label = cell_label(session.doc(), pos);
    const Color color = colors.at(label);
    cells.push_back(Json{{"label", label.label()},
                         {"id", cell.stable_id},
                         {"kind", kind_name(cell.kind)},
                         {"source", cell.source},
                         {"color", to_string(color)},
                         {"emoji", emoji(color)},
                         {"last_executed", last && *last == pos}});
  }
  Json next = Json::array();
  for (const auto& c : session.next_cells()) next.push_back(c.label());
  return Json{{"version", version},
              {"state", Dfa::state_label(session.current())},
              {"complete", session.complete()},
              {"next_cells", std::move(next)},
              {"cells", std::move(cells)}};
}

Json trace_json(const Session& session) {
  Json user = Json::array();
  for (const auto& step : session.user_trace())
    user.push_back(Json{{"cell", step.cell.label()}, {"state", Dfa::state_label(step.state)}});
  return Json{{"log_trace", to_json(session.log_trace())}, {"user_trace", std::move(user)}};
}

Json error_json(const std::exception& e) {
  Json err{{"code", "internal"}, {"message", e.what()}};
  if (const auto* me = dynamic_cast<const Error*>(&e)) {
    err["code"] = to_string(me->code());
    if (me->span()) err["span"] = Json{{"begin", me->span()->begin}, {"end", me->span()->end}};
  }
  return Json{{"error", std::move(err)}};
}

std::string new_session_id() {
  std::random_device rd;
  std::string out;
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 0; i < 4; ++i) {
    std::uint32_t word = rd();
    for (int nib = 0; nib < 8; ++nib) {
      out += kHex[word & 0xF];
      word >>= 4;
    }
  }
  return out;
}

struct SessionRegistry::Entry {
  explicit Entry(Session s) : session(std::move(s)) {}
  mutable std::mutex mutex;
  mutable std::condition_variable changed;
  Session session;
  std::uint64_t version = 0;
};

SessionRegistry::SessionRegistry(CompileLimits limits) : limits_(limits) {}

SessionRegistry::~SessionRegistry() { shutdown(); }

SessionRegistry::Created SessionRegistry::create(const Json& notebook, std::string_view script) {
  NotebookDoc doc = notebook.is_string() ? NotebookDoc::parse(notebook.get<std::string>())
                                         : NotebookDoc::parse(notebook.dump());
  auto entry = std::make_shared<Entry>(Session::start(doc, parse_script(script), limits_));
  Created out;
  out.view = view_json(entry->session, entry->version);
  std::unique_lock lock(mutex_);
  do {
    out.id = new_session_id();
  } while (sessions_.count(out.id));
  sessions_.emplace(out.id, std::move(entry));
  return out;
}

std::shared_ptr<SessionRegistry::Entry> SessionRegistry::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session " + id);
  return it->second;
}

Json SessionRegistry::post_action(const std::string& id, const Json& action) {
  auto entry = find(id);
  if (!action.is_object() || !action.contains("action") || !action["action"].is_string())
    throw Error(ErrorCode::InvalidArgument, "request needs an \"action\" string");
  const std::string name = action["action"].get<std::string>();

  std::lock_guard lock(entry->mutex);
  Session& s = entry->session;
  Json out = Json::object();
  if (name == "snapshot") {
    out["view"] = view_json(s, entry->version);
    out["notebook"] = s.snapshot().to_json();
    return out;
  }
  if (name == "execute") {
    auto cell = action.find("cell");
    if (cell == action.end() || !cell->is_string()) throw Error(ErrorCode::InvalidArgument, "execute needs a \"cell\" label");
    auto label = CellRef::parse(cell->get<std::string>());
    if (!label) throw Error(ErrorCode::InvalidArgument, "bad cell label '" + cell->get<std::string>() + "'");
    ExecOutcome r = s.execute_cell(*label);
    out["outcome"] = Json{{"classification", to_string(r.classification)},
                          {"state", Dfa::state_label(r.new_state)},
                          {"complete", r.complete}};
  } else if (name == "back") {
    s.step_back();
  } else if (name == "reset") {
    s.reset();
  } else if (name == "insert") {
    s.insert_cell(parse_position(action), parse_kind(action.value("kind", Json("code"))));
  } else if (name == "delete") {
    s.delete_cell(parse_position(action));
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown action '" + name + "'");
  }
  ++entry->version;
  out["view"] = view_json(s, entry->version);
  entry->changed.notify_all();
  return out;
}

Json SessionRegistry::view(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return view_json(entry->session, entry->version);
}

Json SessionRegistry::trace(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return trace_json(entry->session);
}

std::uint64_t SessionRegistry::version(const std::string& id) const {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->version;
}

std::optional<Json> SessionRegistry::wait_for_update(const std::string& id, std::uint64_t since,
                                                     std::chrono::milliseconds timeout) const {
  auto entry = find(id);
  std::unique_lock lock(entry->mutex);
  entry->changed.wait_for(lock, timeout, [&] { return stopping_ || entry->version > since; });
  if (entry->version > since) return view_json(entry->session, entry->version);
  return std::nullopt;
}

std::size_t SessionRegistry::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

void SessionRegistry::shutdown() {
  stopping_ = true;
  std::shared_lock lock(mutex_);
  for (auto& [id, entry] : sessions_) {
    std::lock_guard entry_lock(entry->mutex);
    entry->changed.notify_all();
  }
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

int http_status(const std::exception& e) {
  const auto* me = dynamic_cast<const Error*>(&e);
  if (!me) return 500;
  switch (me->code()) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::InvalidArgument:
    case ErrorCode::Range: return 400;
    default: return 422;
  }
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

Json parse_body(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

}  // namespace

struct Server::Impl {
  explicit Impl(SessionRegistry& r) : registry(r) {}
  SessionRegistry& registry;
  httplib::Server http;
  std::atomic<bool> stopping{false};
  bool bound = false;
};

Server::Server(SessionRegistry& registry) : impl_(std::make_unique<Impl>(registry)) {
  auto& http = impl_->http;
  Impl* impl = impl_.get();
  constexpr const char* kId = "([0-9a-f]{32})";

  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const std::exception& e) {
        send_json(res, http_status(e), error_json(e));
      }
    };
  };

  http.Post("/sessions", guarded([impl](const httplib::Request& req, httplib::Response& res) {
              Json body = parse_body(req);
              if (!body.is_object() || !body.contains("notebook") || !body.contains("script") ||
                  !body["script"].is_string())
                throw Error(ErrorCode::InvalidArgument, "body needs \"notebook\" and \"script\"");
              auto created = impl->registry.create(body["notebook"], body["script"].get<std::string>());
              send_json(res, 201, Json{{"id", created.id}, {"view", created.view}});
            }));

  http.Post(std::string("/sessions/") + kId + "/actions",
            guarded([impl](const httplib::Request& req, httplib::Response& res) {
              const std::string id = req.matches[1];
              Json action = parse_body(req);
              try {
                send_json(res, 200, impl->registry.post_action(id, action));
              } catch (const Error& e) {
                if (e.code() != ErrorCode::Forbidden) throw;
                Json body = error_json(e);
                body["view"] = impl->registry.view(id);
                send_json(res, 403, body);
              }
            }));

  http.Get(std::string("/sessions/") + kId, guarded([impl](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             send_json(res, 200, Json{{"id", id}, {"view", impl->registry.view(id)}});
           }));

  http.Get(std::string("/sessions/") + kId + "/trace",
           guarded([impl](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, impl->registry.trace(req.matches[1]));
           }));

  http.Get(std::string("/sessions/") + kId + "/events",
           guarded([impl](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             // Validates the id before the stream starts.
             Json first = impl->registry.view(id);
             auto since = std::make_shared<std::uint64_t>(first["version"].get<std::uint64_t>());
             auto pending = std::make_shared<std::optional<Json>>(std::move(first));
             auto idle = std::make_shared<int>(0);
             res.set_header("Cache-Control", "no-cache");
             res.set_chunked_content_provider(
                 "text/event-stream", [impl, id, since, pending, idle](std::size_t, httplib::DataSink& sink) {
                   if (impl->stopping) {
                     sink.done();
                     return true;
                   }
                   std::optional<Json> view = std::move(*pending);
                   pending->reset();
                   if (!view) view = impl->registry.wait_for_update(id, *since, std::chrono::milliseconds(250));
                   std::string chunk;
                   if (view) {
                     *idle = 0;
                     *since = (*view)["version"].get<std::uint64_t>();
                     chunk = "event: view\ndata: " + view->dump() + "\n\n";
                   } else if (++*idle % 40 == 0) {
                     chunk = ": keepalive\n\n";
                   } else {
                     return true;
                   }
                   return sink.write(chunk.data(), chunk.size());
                 });
           }));
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
  impl_->bound = bound > 0;
  return bound;
}

bool Server::run() {
  if (!impl_->bound) return false;
  return impl_->http.listen_after_bind();
}

void Server::stop() {
  impl_->stopping = true;
  impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace moon
