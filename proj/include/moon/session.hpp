#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "moon/automaton.hpp"
#include "moon/notebook.hpp"
#include "moon/script.hpp"

namespace moon {

enum class Color { Green, Orange, Red, White };

const char* to_string(Color c) noexcept;
const char* emoji(Color c) noexcept;

enum class Classification { Advance, ReexecStay, Backtrack, Deviation, White };

const char* to_string(Classification c) noexcept;

struct TraceStep {
  CellRef cell;
  StateId state = 0;

  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct ExecOutcome {
  Classification classification = Classification::Deviation;
  StateId new_state = 0;
  bool complete = false;
};

/// Position in the automaton plus the user trace of valid transitions.
/// Shared by live sessions and offline replay so both classify identically.
class Guide {
 public:
  explicit Guide(std::shared_ptr<const Dfa> dfa);

  /// Priority: advance, re-execution of the last traced cell, backtrack to
  /// the last occurrence of the cell, deviation.
  Classification execute(CellRef symbol);
  void step_back();
  void reset();

  const Dfa& dfa() const { return *dfa_; }
  const std::shared_ptr<const Dfa>& dfa_ptr() const { return dfa_; }
  StateId current() const { return current_; }
  const std::vector<TraceStep>& trace() const { return trace_; }
  bool complete() const { return dfa_->is_accepting(current_); }
  bool in_trace(CellRef symbol) const;

 private:
  std::shared_ptr<const Dfa> dfa_;
  StateId current_ = 0;
  std::vector<TraceStep> trace_;
};

/// A live guided session over one notebook.
///
/// Scenario cells are bound by stable id, so positions given to the methods
/// below always refer to the current layout (after insertions/deletions),
/// while the automaton and the traces keep using scenario labels.
/// Not thread-safe; callers serialise access.
class Session {
 public:
  /// Throws Error{Validation} when the script does not fit the notebook;
  /// compile and metadata errors propagate.
  static Session start(const NotebookDoc& doc, const ScriptAst& script, const CompileLimits& limits = {});
  /// Reuses an already compiled automaton.
  static Session start(const NotebookDoc& doc, const ScriptAst& script, std::shared_ptr<const Dfa> dfa);

  ExecOutcome execute_cell(std::size_t position);
  /// `label` uses current positions, e.g. "C6" after an insertion before C5.
  ExecOutcome execute_cell(const CellRef& label);

  void step_back() { guide_.step_back(); }
  void reset() { guide_.reset(); }
  void insert_cell(std::size_t position, CellKind kind);
  /// Throws Error{Forbidden} for scenario cells, Error{Range} past the end.
  void delete_cell(std::size_t position);

  /// Colour of every cell, keyed by its current label.
  std::map<CellRef, Color> colors() const;
  /// Green code cells by current position.
  std::vector<CellRef> next_cells() const;

  const NotebookDoc& doc() const { return doc_; }
  const Guide& guide() const { return guide_; }
  const Dfa& dfa() const { return guide_.dfa(); }
  StateId current() const { return guide_.current(); }
  const std::vector<TraceStep>& user_trace() const { return guide_.trace(); }
  const LogTrace& log_trace() const { return log_; }
  bool complete() const { return guide_.complete(); }

  /// Scenario identity of the cell currently at `position`, if any.
  std::optional<CellRef> scenario_ref(std::size_t position) const;
  /// Current position of a scenario cell.
  std::optional<std::size_t> position_of(CellRef scenario) const;
  std::optional<std::size_t> last_executed_position() const;

  /// The notebook with the log trace in its metadata and every scenario
  /// cell tagged with its role, so it still maps onto the script after
  /// insertions.
  NotebookDoc snapshot() const;

 private:
  Session(NotebookDoc doc, std::shared_ptr<const Dfa> dfa);

  Color color_of(CellRef scenario) const;

  NotebookDoc doc_;
  Guide guide_;
  LogTrace log_;
  std::int64_t next_ts_ = 0;
  std::map<std::string, CellRef> id_map_;             // stable id -> scenario label
  std::map<CellRef, std::set<CellRef>> text_assoc_;    // code -> texts
  std::map<CellRef, std::set<CellRef>> text_owners_;   // text -> codes
  std::optional<std::string> last_executed_;
};

}  // namespace moon
