#pragma once

#include <compare>
#include <map>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace moon {

using Json = nlohmann::ordered_json;

enum class CellKind { Code, Text };

/// A cell identity as written in scripts: `C<index>` or `T<index>`.
struct CellRef {
  CellKind kind = CellKind::Code;
  std::size_t index = 0;

  static CellRef code(std::size_t i) { return {CellKind::Code, i}; }
  static CellRef text(std::size_t i) { return {CellKind::Text, i}; }

  std::string label() const;
  /// Parses `C12` / `T3`; nullopt on anything else.
  static std::optional<CellRef> parse(std::string_view label);

  friend auto operator<=>(const CellRef&, const CellRef&) = default;
};

struct Cell {
  std::string stable_id;
  CellKind kind = CellKind::Code;
  std::string source;
  Json raw;  // the cell object as stored in the document
};

struct LogEntry {
  CellRef cell;
  std::int64_t ts = 0;
  bool white = false;  // execution of a cell outside the scenario

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

/// Every code-cell execution, compliant or not, in execution order.
struct LogTrace {
  std::vector<LogEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  friend bool operator==(const LogTrace&, const LogTrace&) = default;
};

/// Metadata key under which the log trace is stored.
inline constexpr const char* kMetadataKey = "moon";

/// An immutable notebook document. Positions are indices into cells().
class NotebookDoc {
 public:
  NotebookDoc();

  /// Parses a version-4 notebook. Throws Error{Parse|Version}.
  static NotebookDoc parse(std::string_view bytes);

  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }
  const Cell& cell(std::size_t position) const;
  const Json& metadata() const;

  /// Position of the cell with the given stable id, if any.
  std::optional<std::size_t> position_of(std::string_view stable_id) const;

  NotebookDoc with_metadata(Json metadata) const;
  /// Replaces the metadata object of one cell.
  NotebookDoc with_cell_metadata(std::size_t position, Json metadata) const;
  /// Inserts an empty cell with a fresh stable id before `position`.
  NotebookDoc with_cell_inserted(std::size_t position, CellKind kind) const;
  NotebookDoc with_cell_removed(std::size_t position) const;

  Json to_json() const;
  std::string dump(int indent = 1) const;

 private:
  Json root_;  // document without "cells"
  std::vector<Cell> cells_;
  std::uint64_t next_id_ = 0;

  std::string fresh_id();
};

/// Label of the cell at `position`. Throws Error{Range}.
CellRef cell_label(const NotebookDoc& doc, std::size_t position);

/// Stored trace, or an empty one when the key is absent. Throws Error{Format}.
LogTrace read_log_trace(const NotebookDoc& doc);

NotebookDoc write_log_trace(const NotebookDoc& doc, const LogTrace& trace);

/// Scenario role stored in a cell's own metadata, {"moon": {"scenario": "C5"}}.
/// Snapshots record it so that a notebook whose cells moved still maps onto
/// its script. Throws Error{Format} on a malformed tag.
std::optional<CellRef> scenario_tag(const Cell& cell);
bool has_scenario_tags(const NotebookDoc& doc);
/// Tags the given positions and clears every other tag.
NotebookDoc with_scenario_tags(const NotebookDoc& doc, const std::map<std::size_t, CellRef>& tags);
/// Position of the cell playing `ref` in the script: the cell tagged with it
/// when the document carries tags, otherwise the cell at ref.index.
std::optional<std::size_t> scenario_position(const NotebookDoc& doc, CellRef ref);

Json to_json(const LogTrace& trace);
LogTrace log_trace_from_json(const Json& value);

}  // namespace moon
