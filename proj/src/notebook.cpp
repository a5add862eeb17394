#include "moon/notebook.hpp"

#include <charconv>
#include <unordered_set>

#include "moon/error.hpp"

namespace moon {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Version: return "version";
    case ErrorCode::Range: return "range";
    case ErrorCode::Format: return "format";
    case ErrorCode::Syntax: return "syntax";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Blowup: return "blowup";
    case ErrorCode::Size: return "size";
    case ErrorCode::Forbidden: return "forbidden";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::UndefinedMetric: return "undefined-metric";
    case ErrorCode::InvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

std::string CellRef::label() const {
  return (kind == CellKind::Code ? "C" : "T") + std::to_string(index);
}

std::optional<CellRef> CellRef::parse(std::string_view label) {
  if (label.size() < 2 || (label[0] != 'C' && label[0] != 'T')) return std::nullopt;
  std::size_t index = 0;
  const char* first = label.data() + 1;
  const char* last = label.data() + label.size();
  auto [ptr, ec] = std::from_chars(first, last, index);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return CellRef{label[0] == 'C' ? CellKind::Code : CellKind::Text, index};
}

namespace {

std::string join_source(const Json& source) {
  if (source.is_null()) return {};
  if (source.is_string()) return source.get<std::string>();
  if (source.is_array()) {
    std::string out;
    for (const auto& line : source) {
      if (!line.is_string()) throw Error(ErrorCode::Parse, "cell source lines must be strings");
      out += line.get<std::string>();
    }
    return out;
  }
  throw Error(ErrorCode::Parse, "cell source must be a string or a list of strings");
}

}  // namespace

NotebookDoc::NotebookDoc()
    : root_(Json{{"metadata", Json::object()}, {"nbformat", 4}, {"nbformat_minor", 5}}) {}

NotebookDoc NotebookDoc::parse(std::string_view bytes) {
  Json root;
  try {
    root = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw Error(ErrorCode::Parse, std::string("malformed notebook: ") + e.what(), Span{at, at + 1});
  }
  if (!root.is_object()) throw Error(ErrorCode::Parse, "notebook must be a JSON object");
  auto fmt = root.find("nbformat");
  if (fmt == root.end() || !fmt->is_number_integer())
    throw Error(ErrorCode::Version, "missing nbformat version");
  if (fmt->get<std::int64_t>() < 4)
    throw Error(ErrorCode::Version, "unsupported nbformat " + std::to_string(fmt->get<std::int64_t>()));
  auto cells = root.find("cells");
  if (cells == root.end() || !cells->is_array())
    throw Error(ErrorCode::Parse, "notebook has no cell list");
  if (root.contains("metadata") && !root["metadata"].is_object())
    throw Error(ErrorCode::Parse, "notebook metadata must be an object");

  NotebookDoc doc;
  doc.cells_.reserve(cells->size());
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> missing_ids;
  for (std::size_t pos = 0; pos < cells->size(); ++pos) {
    const Json& raw = (*cells)[pos];
    if (!raw.is_object()) throw Error(ErrorCode::Parse, "cell " + std::to_string(pos) + " is not an object");
    auto type = raw.find("cell_type");
    if (type == raw.end() || !type->is_string())
      throw Error(ErrorCode::Parse, "cell " + std::to_string(pos) + " has no cell_type");
    Cell cell;
    const auto& t = type->get_ref<const std::string&>();
    if (t == "code") {
      cell.kind = CellKind::Code;
    } else if (t == "markdown") {
      cell.kind = CellKind::Text;
    } else {
      throw Error(ErrorCode::Parse, "cell " + std::to_string(pos) + " has unsupported type '" + t + "'");
    }
    cell.source = join_source(raw.value("source", Json()));
    cell.raw = raw;
    auto id = raw.find("id");
    if (id != raw.end() && id->is_string() && seen.insert(id->get<std::string>()).second) {
      cell.stable_id = id->get<std::string>();
    } else {
      missing_ids.push_back(pos);
    }
    doc.cells_.push_back(std::move(cell));
  }
  root.erase("cells");
  if (!root.contains("metadata")) root["metadata"] = Json::object();
  doc.root_ = std::move(root);
  for (std::size_t pos : missing_ids) {
    std::string id;
    do {
      id = doc.fresh_id();
    } while (seen.count(id));
    seen.insert(id);
    doc.cells_[pos].stable_id = id;
  }
  return doc;
}

std::string NotebookDoc::fresh_id() {
  std::string id;
  do {
    id = "moon-" + std::to_string(next_id_++);
  } while (position_of(id).has_value());
  return id;
}

const Cell& NotebookDoc::cell(std::size_t position) const {
  if (position >= cells_.size())
    throw Error(ErrorCode::Range, "cell position " + std::to_string(position) + " out of range (" +
                                      std::to_string(cells_.size()) + " cells)");
  return cells_[position];
}

const Json& NotebookDoc::metadata() const { return root_.at("metadata"); }

std::optional<std::size_t> NotebookDoc::position_of(std::string_view stable_id) const {
  for (std::size_t i = 0; i < cells_.size(); ++i)
    if (cells_[i].stable_id == stable_id) return i;
  return std::nullopt;
}

NotebookDoc NotebookDoc::with_metadata(Json metadata) const {
  NotebookDoc out = *this;
  out.root_["metadata"] = std::move(metadata);
  return out;
}

NotebookDoc NotebookDoc::with_cell_metadata(std::size_t position, Json metadata) const {
  cell(position);
  NotebookDoc out = *this;
  out.cells_[position].raw["metadata"] = std::move(metadata);
  return out;
}

NotebookDoc NotebookDoc::with_cell_inserted(std::size_t position, CellKind kind) const {
  if (position > cells_.size())
    throw Error(ErrorCode::Range, "insert position " + std::to_string(position) + " out of range (" +
                                      std::to_string(cells_.size()) + " cells)");
  NotebookDoc out = *this;
  Cell cell;
  cell.kind = kind;
  cell.stable_id = out.fresh_id();
  cell.raw = Json::object();
  cell.raw["cell_type"] = kind == CellKind::Code ? "code" : "markdown";
  if (root_.value("nbformat_minor", 0) >= 5) cell.raw["id"] = cell.stable_id;
  cell.raw["metadata"] = Json::object();
  cell.raw["source"] = "";
  if (kind == CellKind::Code) {
    cell.raw["execution_count"] = nullptr;
    cell.raw["outputs"] = Json::array();
  }
  out.cells_.insert(out.cells_.begin() + static_cast<std::ptrdiff_t>(position), std::move(cell));
  return out;
}

NotebookDoc NotebookDoc::with_cell_removed(std::size_t position) const {
  cell(position);
  NotebookDoc out = *this;
  out.cells_.erase(out.cells_.begin() + static_cast<std::ptrdiff_t>(position));
  return out;
}

Json NotebookDoc::to_json() const {
  Json out = Json::object();
  Json cells = Json::array();
  for (const auto& c : cells_) cells.push_back(c.raw);
  // Keep "cells" first, as notebook writers do.
  out["cells"] = std::move(cells);
  for (const auto& [key, value] : root_.items()) out[key] = value;
  return out;
}

std::string NotebookDoc::dump(int indent) const { return to_json().dump(indent) + "\n"; }

CellRef cell_label(const NotebookDoc& doc, std::size_t position) {
  return CellRef{doc.cell(position).kind, position};
}

std::optional<CellRef> scenario_tag(const Cell& cell) {
  auto meta = cell.raw.find("metadata");
  if (meta == cell.raw.end() || !meta->is_object()) return std::nullopt;
  auto tag = meta->find(kMetadataKey);
  if (tag == meta->end()) return std::nullopt;
  auto label = tag->is_object() ? tag->find("scenario") : tag->end();
  if (label == tag->end() || !label->is_string())
    throw Error(ErrorCode::Format, "cell " + cell.stable_id + " has a malformed scenario tag");
  auto ref = CellRef::parse(label->get<std::string>());
  if (!ref || ref->kind != cell.kind)
    throw Error(ErrorCode::Format, "cell " + cell.stable_id + " has invalid scenario tag '" +
                                       label->get<std::string>() + "'");
  return ref;
}

bool has_scenario_tags(const NotebookDoc& doc) {
  for (const auto& c : doc.cells())
    if (scenario_tag(c)) return true;
  return false;
}

NotebookDoc with_scenario_tags(const NotebookDoc& doc, const std::map<std::size_t, CellRef>& tags) {
  NotebookDoc out = doc;
  for (std::size_t pos = 0; pos < doc.size(); ++pos) {
    const Json& raw = doc.cell(pos).raw;
    Json meta = raw.contains("metadata") && raw["metadata"].is_object() ? raw["metadata"] : Json::object();
    auto it = tags.find(pos);
    if (it != tags.end()) {
      meta[kMetadataKey] = Json{{"scenario", it->second.label()}};
    } else if (meta.contains(kMetadataKey)) {
      meta.erase(kMetadataKey);
    } else {
      continue;
    }
    out = out.with_cell_metadata(pos, std::move(meta));
  }
  return out;
}

std::optional<std::size_t> scenario_position(const NotebookDoc& doc, CellRef ref) {
  if (has_scenario_tags(doc)) {
    for (std::size_t pos = 0; pos < doc.size(); ++pos)
      if (scenario_tag(doc.cell(pos)) == ref) return pos;
    return std::nullopt;
  }
  if (ref.index >= doc.size()) return std::nullopt;
  return ref.index;
}

Json to_json(const LogTrace& trace) {
  Json out = Json::array();
  for (const auto& e : trace.entries) {
    Json entry{{"cell", e.cell.label()}, {"ts", e.ts}};
    if (e.white) entry["white"] = true;
    out.push_back(std::move(entry));
  }
  return out;
}

LogTrace log_trace_from_json(const Json& value) {
  if (!value.is_array()) throw Error(ErrorCode::Format, "log trace must be a list");
  LogTrace trace;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const Json& e = value[i];
    const std::string where = "log entry " + std::to_string(i);
    if (!e.is_object()) throw Error(ErrorCode::Format, where + " is not an object");
    auto cell = e.find("cell");
    auto ts = e.find("ts");
    if (cell == e.end() || !cell->is_string()) throw Error(ErrorCode::Format, where + " has no cell label");
    if (ts == e.end() || !ts->is_number_integer()) throw Error(ErrorCode::Format, where + " has no integer ts");
    auto ref = CellRef::parse(cell->get<std::string>());
    if (!ref || ref->kind != CellKind::Code)
      throw Error(ErrorCode::Format, where + " has invalid code-cell label '" + cell->get<std::string>() + "'");
    LogEntry entry{*ref, ts->get<std::int64_t>(), false};
    if (auto w = e.find("white"); w != e.end()) {
      if (!w->is_boolean()) throw Error(ErrorCode::Format, where + " has non-boolean white flag");
      entry.white = w->get<bool>();
    }
    trace.entries.push_back(entry);
  }
  return trace;
}

LogTrace read_log_trace(const NotebookDoc& doc) {
  const Json& meta = doc.metadata();
  auto it = meta.find(kMetadataKey);
  if (it == meta.end()) return {};
  return log_trace_from_json(*it);
}

NotebookDoc write_log_trace(const NotebookDoc& doc, const LogTrace& trace) {
  Json meta = doc.metadata();
  meta[kMetadataKey] = to_json(trace);
  return doc.with_metadata(std::move(meta));
}

}  // namespace moon
