#include "moon/moon.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

#include "moon/analytics.hpp"
#include "moon/automaton.hpp"
#include "moon/error.hpp"
#include "moon/notebook.hpp"
#include "moon/script.hpp"
#include "moon/service.hpp"
#include "moon/session.hpp"

struct moon_notebook {
  moon::NotebookDoc doc;
};

struct moon_script {
  moon::ScriptAst ast;
};

struct moon_dfa {
  moon::Dfa dfa;
};

struct moon_session {
  moon::Session session;
};

struct moon_server {
  explicit moon_server(moon::CompileLimits limits) : registry(limits), server(registry) {}
  moon::SessionRegistry registry;
  moon::Server server;
};

namespace {

struct LastError {
  std::string message;
  bool has_span = false;
  std::size_t begin = 0, end = 0;
};

thread_local LastError g_last_error;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

moon_status status_of(moon::ErrorCode code) {
  switch (code) {
    case moon::ErrorCode::Parse: return MOON_E_PARSE;
    case moon::ErrorCode::Version: return MOON_E_VERSION;
    case moon::ErrorCode::Range: return MOON_E_RANGE;
    case moon::ErrorCode::Format: return MOON_E_FORMAT;
    case moon::ErrorCode::Syntax: return MOON_E_SYNTAX;
    case moon::ErrorCode::Validation: return MOON_E_VALIDATION;
    case moon::ErrorCode::Blowup: return MOON_E_BLOWUP;
    case moon::ErrorCode::Size: return MOON_E_SIZE;
    case moon::ErrorCode::Forbidden: return MOON_E_FORBIDDEN;
    case moon::ErrorCode::NotFound: return MOON_E_NOT_FOUND;
    case moon::ErrorCode::UndefinedMetric: return MOON_E_UNDEFINED_METRIC;
    case moon::ErrorCode::InvalidArgument: return MOON_E_INVALID_ARGUMENT;
  }
  return MOON_E_INTERNAL;
}

moon_status fail(moon_status status, const char* message) {
  g_last_error = LastError{message, false, 0, 0};
  return status;
}

template <typename F>
moon_status guarded(F&& body) {
  try {
    body();
    g_last_error = LastError{};
    return MOON_OK;
  } catch (const moon::Error& e) {
    g_last_error = LastError{e.what(), e.span().has_value(), e.span() ? e.span()->begin : 0,
                             e.span() ? e.span()->end : 0};
    return status_of(e.code());
  } catch (const IoError& e) {
    return fail(MOON_E_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MOON_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MOON_E_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

moon::CompileLimits to_limits(const moon_limits* limits) {
  moon::CompileLimits out;
  if (limits) {
    out.max_any_elements = limits->max_any_elements;
    out.max_states = limits->max_states;
  }
  return out;
}

#define MOON_REQUIRE(cond) \
  if (!(cond)) return fail(MOON_E_INVALID_ARGUMENT, "invalid argument: " #cond)

}  // namespace

extern "C" {

const char* moon_status_name(moon_status status) {
  switch (status) {
    case MOON_OK: return "ok";
    case MOON_E_PARSE: return "parse";
    case MOON_E_VERSION: return "version";
    case MOON_E_RANGE: return "range";
    case MOON_E_FORMAT: return "format";
    case MOON_E_SYNTAX: return "syntax";
    case MOON_E_VALIDATION: return "validation";
    case MOON_E_BLOWUP: return "blowup";
    case MOON_E_SIZE: return "size";
    case MOON_E_FORBIDDEN: return "forbidden";
    case MOON_E_NOT_FOUND: return "not-found";
    case MOON_E_UNDEFINED_METRIC: return "undefined-metric";
    case MOON_E_INVALID_ARGUMENT: return "invalid-argument";
    case MOON_E_IO: return "io";
    case MOON_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* moon_last_error(void) { return g_last_error.message.c_str(); }

int moon_last_error_span(size_t* begin, size_t* end) {
  if (!g_last_error.has_span) return 0;
  if (begin) *begin = g_last_error.begin;
  if (end) *end = g_last_error.end;
  return 1;
}

void moon_string_free(char* s) { std::free(s); }

void moon_limits_default(moon_limits* limits) {
  if (!limits) return;
  moon::CompileLimits d;
  limits->max_any_elements = d.max_any_elements;
  limits->max_states = d.max_states;
}

// Notebooks

moon_status moon_notebook_parse(const char* data, size_t len, moon_notebook** out) {
  MOON_REQUIRE(data && out);
  return guarded([&] { *out = new moon_notebook{moon::NotebookDoc::parse(std::string_view(data, len))}; });
}

moon_status moon_notebook_load(const char* path, moon_notebook** out) {
  MOON_REQUIRE(path && out);
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot open ") + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    *out = new moon_notebook{moon::NotebookDoc::parse(buf.str())};
  });
}

void moon_notebook_free(moon_notebook* nb) { delete nb; }

size_t moon_notebook_cell_count(const moon_notebook* nb) { return nb ? nb->doc.size() : 0; }

moon_status moon_notebook_cell_label(const moon_notebook* nb, size_t position, char** out) {
  MOON_REQUIRE(nb && out);
  return guarded([&] { *out = dup_string(moon::cell_label(nb->doc, position).label()); });
}

moon_status moon_notebook_log_trace(const moon_notebook* nb, char** out_json) {
  MOON_REQUIRE(nb && out_json);
  return guarded([&] { *out_json = dup_string(moon::to_json(moon::read_log_trace(nb->doc)).dump()); });
}

moon_status moon_notebook_set_log_trace(moon_notebook* nb, const char* trace_json) {
  MOON_REQUIRE(nb && trace_json);
  return guarded([&] {
    moon::Json value;
    try {
      value = moon::Json::parse(trace_json);
    } catch (const moon::Json::parse_error& e) {
      throw moon::Error(moon::ErrorCode::Format, e.what());
    }
    nb->doc = moon::write_log_trace(nb->doc, moon::log_trace_from_json(value));
  });
}

moon_status moon_notebook_to_json(const moon_notebook* nb, char** out_json) {
  MOON_REQUIRE(nb && out_json);
  return guarded([&] { *out_json = dup_string(nb->doc.dump()); });
}

// Scripts

moon_status moon_script_parse(const char* text, moon_script** out) {
  MOON_REQUIRE(text && out);
  return guarded([&] { *out = new moon_script{moon::parse_script(text)}; });
}

void moon_script_free(moon_script* script) { delete script; }

moon_status moon_script_to_string(const moon_script* script, char** out) {
  MOON_REQUIRE(script && out);
  return guarded([&] { *out = dup_string(moon::to_string(script->ast)); });
}

moon_status moon_script_validate(const moon_script* script, const moon_notebook* nb, int* ok, char** out_json) {
  MOON_REQUIRE(script && nb);
  return guarded([&] {
    auto report = moon::validate_script(script->ast, nb->doc);
    if (ok) *ok = report.ok() ? 1 : 0;
    if (!out_json) return;
    moon::Json issues = moon::Json::array();
    for (const auto& i : report.issues) {
      moon::Json item{{"severity", i.severity == moon::Severity::Error ? "error" : "warning"},
                      {"message", i.message}};
      if (i.cell) item["cell"] = i.cell->label();
      if (i.span) item["span"] = moon::Json{{"begin", i.span->begin}, {"end", i.span->end}};
      issues.push_back(std::move(item));
    }
    *out_json = dup_string(moon::Json{{"ok", report.ok()}, {"issues", std::move(issues)}}.dump());
  });
}

// Automata

moon_status moon_dfa_compile(const moon_script* script, const moon_limits* limits, moon_dfa** out) {
  MOON_REQUIRE(script && out);
  return guarded([&] { *out = new moon_dfa{moon::compile(script->ast, to_limits(limits))}; });
}

void moon_dfa_free(moon_dfa* dfa) { delete dfa; }

size_t moon_dfa_state_count(const moon_dfa* dfa) { return dfa ? dfa->dfa.state_count() : 0; }
size_t moon_dfa_transition_count(const moon_dfa* dfa) { return dfa ? dfa->dfa.transition_count() : 0; }
size_t moon_dfa_alphabet_size(const moon_dfa* dfa) { return dfa ? dfa->dfa.alphabet().size() : 0; }

size_t moon_dfa_accepting_count(const moon_dfa* dfa) {
  if (!dfa) return 0;
  size_t n = 0;
  for (moon::StateId s = 0; s < dfa->dfa.state_count(); ++s) n += dfa->dfa.is_accepting(s) ? 1 : 0;
  return n;
}

moon_status moon_dfa_decorate_reexec_loops(const moon_dfa* dfa, moon_dfa** out) {
  MOON_REQUIRE(dfa && out);
  return guarded([&] { *out = new moon_dfa{moon::decorate_reexec_loops(dfa->dfa)}; });
}

moon_status moon_dfa_export_dot(const moon_dfa* dfa, char** out) {
  MOON_REQUIRE(dfa && out);
  return guarded([&] { *out = dup_string(moon::export_dot(dfa->dfa)); });
}

moon_status moon_dfa_accepts(const moon_dfa* dfa, const char* const* labels, size_t count, int* accepted) {
  MOON_REQUIRE(dfa && accepted && (labels || count == 0));
  return guarded([&] {
    std::vector<moon::CellRef> seq;
    for (size_t i = 0; i < count; ++i) {
      auto ref = labels[i] ? moon::CellRef::parse(labels[i]) : std::nullopt;
      if (!ref) throw moon::Error(moon::ErrorCode::InvalidArgument, "bad cell label");
      seq.push_back(*ref);
    }
    *accepted = moon::accepts(dfa->dfa, seq) ? 1 : 0;
  });
}

// Analytics

moon_status moon_replay(const moon_script* script, const moon_notebook* nb, const moon_limits* limits,
                        char** out_json) {
  MOON_REQUIRE(script && nb && out_json);
  return guarded([&] {
    auto report = moon::validate_script(script->ast, nb->doc);
    for (const auto& i : report.issues)
      if (i.severity == moon::Severity::Error) throw moon::Error(moon::ErrorCode::Validation, i.message, i.span);
    const moon::Dfa dfa = moon::compile(script->ast, to_limits(limits));
    const moon::LogTrace log = moon::read_log_trace(nb->doc);
    const auto annotated = moon::classify_replay(moon::simplify_trace(log), dfa);
    moon::Json entries = moon::Json::array();
    for (const auto& [cell, cls] : annotated.entries)
      entries.push_back(moon::Json{{"cell", cell.label()}, {"class", moon::to_string(cls)}});
    moon::Json out{{"entries", std::move(entries)},
                   {"g", annotated.green},
                   {"o", annotated.orange},
                   {"r", annotated.red},
                   {"fitness", nullptr},
                   {"completeness", moon::completeness(log, moon::scenario_cells(script->ast))}};
    if (!annotated.entries.empty()) {
      auto f = moon::fitness(annotated);
      out["fitness"] = f.value();
      out["fitness_exact"] = moon::Json{{"numerator", f.numerator}, {"denominator", f.denominator}};
    }
    *out_json = dup_string(out.dump());
  });
}

moon_status moon_cohort_report(const moon_script* script, const char* const* ids,
                               const moon_notebook* const* notebooks, const char* const* errors, size_t count,
                               const moon_limits* limits, char** out_csv) {
  MOON_REQUIRE(script && out_csv && (count == 0 || (ids && notebooks)));
  return guarded([&] {
    std::vector<moon::CohortEntry> entries;
    for (size_t i = 0; i < count; ++i) {
      moon::CohortEntry e;
      e.id = ids[i] ? ids[i] : "";
      if (notebooks[i]) e.doc = notebooks[i]->doc;
      if (errors && errors[i]) e.load_error = errors[i];
      entries.push_back(std::move(e));
    }
    *out_csv = dup_string(moon::cohort_report(entries, script->ast, to_limits(limits)).to_csv());
  });
}

// Sessions

moon_status moon_session_start(const moon_notebook* nb, const moon_script* script, const moon_limits* limits,
                               moon_session** out) {
  MOON_REQUIRE(nb && script && out);
  return guarded([&] { *out = new moon_session{moon::Session::start(nb->doc, script->ast, to_limits(limits))}; });
}

void moon_session_free(moon_session* session) { delete session; }

moon_status moon_session_execute(moon_session* session, const char* label, char** out_json) {
  MOON_REQUIRE(session && label);
  return guarded([&] {
    auto ref = moon::CellRef::parse(label);
    if (!ref) throw moon::Error(moon::ErrorCode::InvalidArgument, std::string("bad cell label '") + label + "'");
    auto r = session->session.execute_cell(*ref);
    if (out_json)
      *out_json = dup_string(moon::Json{{"classification", moon::to_string(r.classification)},
                                        {"state", moon::Dfa::state_label(r.new_state)},
                                        {"complete", r.complete}}
                                 .dump());
  });
}

moon_status moon_session_back(moon_session* session) {
  MOON_REQUIRE(session);
  return guarded([&] { session->session.step_back(); });
}

moon_status moon_session_reset(moon_session* session) {
  MOON_REQUIRE(session);
  return guarded([&] { session->session.reset(); });
}

moon_status moon_session_insert(moon_session* session, size_t position, moon_cell_kind kind) {
  MOON_REQUIRE(session);
  return guarded([&] {
    session->session.insert_cell(position, kind == MOON_CELL_TEXT ? moon::CellKind::Text : moon::CellKind::Code);
  });
}

moon_status moon_session_delete(moon_session* session, size_t position) {
  MOON_REQUIRE(session);
  return guarded([&] { session->session.delete_cell(position); });
}

moon_status moon_session_view(const moon_session* session, char** out_json) {
  MOON_REQUIRE(session && out_json);
  return guarded([&] { *out_json = dup_string(moon::view_json(session->session, 0).dump()); });
}

moon_status moon_session_trace(const moon_session* session, char** out_json) {
  MOON_REQUIRE(session && out_json);
  return guarded([&] { *out_json = dup_string(moon::trace_json(session->session).dump()); });
}

moon_status moon_session_snapshot(const moon_session* session, moon_notebook** out) {
  MOON_REQUIRE(session && out);
  return guarded([&] { *out = new moon_notebook{session->session.snapshot()}; });
}

// Service

moon_status moon_server_create(const moon_limits* limits, moon_server** out) {
  MOON_REQUIRE(out);
  return guarded([&] { *out = new moon_server(to_limits(limits)); });
}

void moon_server_free(moon_server* server) { delete server; }

moon_status moon_server_add_session(moon_server* server, const moon_notebook* nb, const char* script,
                                    char** out_id) {
  MOON_REQUIRE(server && nb && script && out_id);
  return guarded([&] {
    auto created = server->registry.create(nb->doc.to_json(), script);
    *out_id = dup_string(created.id);
  });
}

moon_status moon_server_bind(moon_server* server, const char* host, int port, int* bound_port) {
  MOON_REQUIRE(server && host && port >= 0);
  int bound = server->server.bind(host, port);
  if (bound <= 0) return fail(MOON_E_IO, "cannot bind server socket");
  if (bound_port) *bound_port = bound;
  g_last_error = LastError{};
  return MOON_OK;
}

moon_status moon_server_run(moon_server* server) {
  MOON_REQUIRE(server);
  return guarded([&] {
    if (!server->server.run()) throw IoError("server is not bound or failed while listening");
  });
}

void moon_server_stop(moon_server* server) {
  if (server) server->server.stop();
}

}  // extern "C"
