/*
 * C interface to the moon scenario engine.
 *
 * Objects are opaque handles created by *_parse / *_compile / *_start /
 * *_create functions and released with the matching *_free. Every fallible
 * call returns a moon_status; on failure moon_last_error() describes the
 * problem for the calling thread. Strings handed out through char** are
 * heap-allocated and released with moon_string_free(). Structured results
 * (reports, views, traces) are JSON documents.
 */
#ifndef MOON_MOON_H
#define MOON_MOON_H

#include <stddef.h>

#if defined(_WIN32)
#define MOON_API __declspec(dllexport)
#elif defined(__GNUC__)
#define MOON_API __attribute__((visibility("default")))
#else
#define MOON_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum moon_status {
  MOON_OK = 0,
  MOON_E_PARSE = 1,
  MOON_E_VERSION = 2,
  MOON_E_RANGE = 3,
  MOON_E_FORMAT = 4,
  MOON_E_SYNTAX = 5,
  MOON_E_VALIDATION = 6,
  MOON_E_BLOWUP = 7,
  MOON_E_SIZE = 8,
  MOON_E_FORBIDDEN = 9,
  MOON_E_NOT_FOUND = 10,
  MOON_E_UNDEFINED_METRIC = 11,
  MOON_E_INVALID_ARGUMENT = 12,
  MOON_E_IO = 13,
  MOON_E_INTERNAL = 14
} moon_status;

typedef struct moon_notebook moon_notebook;
typedef struct moon_script moon_script;
typedef struct moon_dfa moon_dfa;
typedef struct moon_session moon_session;
typedef struct moon_server moon_server;

typedef struct moon_limits {
  size_t max_any_elements; /* largest any-order group, default 6 */
  size_t max_states;       /* largest automaton, default 10000 */
} moon_limits;

typedef enum moon_cell_kind { MOON_CELL_CODE = 0, MOON_CELL_TEXT = 1 } moon_cell_kind;

/* Errors ------------------------------------------------------------------ */

MOON_API const char* moon_status_name(moon_status status);
/* Message of the last failed call on this thread ("" if none). */
MOON_API const char* moon_last_error(void);
/* Source span of the last failure; returns 0 when it carried none. */
MOON_API int moon_last_error_span(size_t* begin, size_t* end);
MOON_API void moon_string_free(char* s);
MOON_API void moon_limits_default(moon_limits* limits);

/* Notebooks --------------------------------------------------------------- */

MOON_API moon_status moon_notebook_parse(const char* data, size_t len, moon_notebook** out);
MOON_API moon_status moon_notebook_load(const char* path, moon_notebook** out);
MOON_API void moon_notebook_free(moon_notebook* nb);
MOON_API size_t moon_notebook_cell_count(const moon_notebook* nb);
MOON_API moon_status moon_notebook_cell_label(const moon_notebook* nb, size_t position, char** out);
/* The stored log trace as a JSON list of {cell, ts[, white]}. */
MOON_API moon_status moon_notebook_log_trace(const moon_notebook* nb, char** out_json);
/* Replaces the stored log trace with a JSON list in the same format. */
MOON_API moon_status moon_notebook_set_log_trace(moon_notebook* nb, const char* trace_json);
MOON_API moon_status moon_notebook_to_json(const moon_notebook* nb, char** out_json);

/* Scripts ----------------------------------------------------------------- */

MOON_API moon_status moon_script_parse(const char* text, moon_script** out);
MOON_API void moon_script_free(moon_script* script);
MOON_API moon_status moon_script_to_string(const moon_script* script, char** out);
/* *ok is 1 when no error-severity issue exists. report:
 * {"ok": bool, "issues": [{"severity", "message", "cell"?, "span"?}]} */
MOON_API moon_status moon_script_validate(const moon_script* script, const moon_notebook* nb, int* ok,
                                          char** out_json);

/* Automata ---------------------------------------------------------------- */

/* limits may be NULL for the defaults. */
MOON_API moon_status moon_dfa_compile(const moon_script* script, const moon_limits* limits, moon_dfa** out);
MOON_API void moon_dfa_free(moon_dfa* dfa);
MOON_API size_t moon_dfa_state_count(const moon_dfa* dfa);
MOON_API size_t moon_dfa_transition_count(const moon_dfa* dfa);
MOON_API size_t moon_dfa_accepting_count(const moon_dfa* dfa);
MOON_API size_t moon_dfa_alphabet_size(const moon_dfa* dfa);
MOON_API moon_status moon_dfa_decorate_reexec_loops(const moon_dfa* dfa, moon_dfa** out);
MOON_API moon_status moon_dfa_export_dot(const moon_dfa* dfa, char** out);
MOON_API moon_status moon_dfa_accepts(const moon_dfa* dfa, const char* const* labels, size_t count, int* accepted);

/* Analytics --------------------------------------------------------------- */

/* Replays the notebook's stored log trace (simplified first):
 * {"entries": [{"cell", "class"}], "g", "o", "r", "fitness": number|null,
 *  "completeness"} */
MOON_API moon_status moon_replay(const moon_script* script, const moon_notebook* nb, const moon_limits* limits,
                                 char** out_json);
/* Cohort table as CSV. notebooks[i] may be NULL, in which case errors[i]
 * (may be NULL) explains why it could not be loaded. */
MOON_API moon_status moon_cohort_report(const moon_script* script, const char* const* ids,
                                        const moon_notebook* const* notebooks, const char* const* errors,
                                        size_t count, const moon_limits* limits, char** out_csv);

/* Live sessions ----------------------------------------------------------- */

MOON_API moon_status moon_session_start(const moon_notebook* nb, const moon_script* script,
                                        const moon_limits* limits, moon_session** out);
MOON_API void moon_session_free(moon_session* session);
/* label uses current positions. outcome: {"classification", "state", "complete"} */
MOON_API moon_status moon_session_execute(moon_session* session, const char* label, char** out_json);
MOON_API moon_status moon_session_back(moon_session* session);
MOON_API moon_status moon_session_reset(moon_session* session);
MOON_API moon_status moon_session_insert(moon_session* session, size_t position, moon_cell_kind kind);
MOON_API moon_status moon_session_delete(moon_session* session, size_t position);
MOON_API moon_status moon_session_view(const moon_session* session, char** out_json);
MOON_API moon_status moon_session_trace(const moon_session* session, char** out_json);
/* Notebook with the session's log trace stored in its metadata. */
MOON_API moon_status moon_session_snapshot(const moon_session* session, moon_notebook** out);

/* Service ----------------------------------------------------------------- */

MOON_API moon_status moon_server_create(const moon_limits* limits, moon_server** out);
MOON_API void moon_server_free(moon_server* server);
/* Registers a session; *out_id receives its id. */
MOON_API moon_status moon_server_add_session(moon_server* server, const moon_notebook* nb, const char* script,
                                             char** out_id);
/* port 0 picks a free port, reported through *bound_port. */
MOON_API moon_status moon_server_bind(moon_server* server, const char* host, int port, int* bound_port);
/* Blocks until moon_server_stop(). */
MOON_API moon_status moon_server_run(moon_server* server);
MOON_API void moon_server_stop(moon_server* server);

#ifdef __cplusplus
}
#endif

#endif /* MOON_MOON_H */
