#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "moon/automaton.hpp"
#include "moon/notebook.hpp"
#include "moon/script.hpp"

namespace moon {

enum class ExecClass { Green, Orange, Red };

const char* to_string(ExecClass c) noexcept;

struct AnnotatedTrace {
  std::vector<std::pair<CellRef, ExecClass>> entries;
  std::size_t green = 0;
  std::size_t orange = 0;
  std::size_t red = 0;
};

/// Exact ratio; value() is the nearest double.
struct Fraction {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;

  double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

/// Collapses runs of consecutive executions of the same cell.
LogTrace simplify_trace(const LogTrace& log);

/// Replays a (simplified) log through a fresh guide: advance is green,
/// re-execution and backtracking are orange, deviations are red. White
/// entries are skipped.
AnnotatedTrace classify_replay(const LogTrace& log, const Dfa& dfa);

/// (g + o) / (g + o + r). Throws Error{UndefinedMetric} on an empty trace.
Fraction fitness(const AnnotatedTrace& annotated);

/// Distinct scenario code cells with at least one logged execution.
std::size_t completeness(const LogTrace& log, const std::set<CellRef>& scenario_cells);

/// Code cells referenced by the script.
std::set<CellRef> scenario_cells(const ScriptAst& script);

struct CohortEntry {
  std::string id;
  std::optional<NotebookDoc> doc;  // nullopt when loading failed
  std::string load_error;
};

struct CohortRow {
  std::string id;
  std::string error;  // non-empty for failed notebooks
  std::size_t green = 0;
  std::size_t orange = 0;
  std::size_t red = 0;
  std::optional<Fraction> fitness;
  std::size_t completeness = 0;
};

struct CohortSummary {
  std::string label;  // min, median, max
  double green = 0, orange = 0, red = 0, completeness = 0;
  std::optional<double> fitness;  // over rows whose fitness is defined
};

struct CohortReport {
  std::vector<CohortRow> rows;           // sorted by id
  std::vector<CohortSummary> summary;    // empty when every row failed

  std::string to_csv() const;
};

inline constexpr const char* kCohortHeader = "id,g,o,r,fitness,completeness";

/// Per-notebook metrics of the stored log traces; failures become error rows.
CohortReport cohort_report(const std::vector<CohortEntry>& notebooks, const ScriptAst& script,
                           const CompileLimits& limits = {});

/// Shortest decimal text that reads back as the same double.
std::string format_number(double v);

}  // namespace moon
