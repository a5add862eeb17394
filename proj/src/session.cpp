#include "moon/session.hpp"

#include <algorithm>

#include "moon/error.hpp"

namespace moon {

const char* to_string(Color c) noexcept {
  switch (c) {
    case Color::Green: return "green";
    case Color::Orange: return "orange";
    case Color::Red: return "red";
    case Color::White: return "white";
  }
  return "?";
}

const char* emoji(Color c) noexcept {
  switch (c) {
    case Color::Green: return "▶";
    case Color::Orange: return "✔";
    case Color::Red: return "⛔";
    case Color::White: return "✏";
  }
  return "";
}

const char* to_string(Classification c) noexcept {
  switch (c) {
    case Classification::Advance: return "advance";
    case Classification::ReexecStay: return "reexec-stay";
    case Classification::Backtrack: return "backtrack";
    case Classification::Deviation: return "deviation";
    case Classification::White: return "white";
  }
  return "?";
}

Guide::Guide(std::shared_ptr<const Dfa> dfa) : dfa_(std::move(dfa)) {
  if (!dfa_ || dfa_->state_count() == 0) throw Error(ErrorCode::InvalidArgument, "guide needs a non-empty automaton");
  current_ = dfa_->start();
}

Classification Guide::execute(CellRef symbol) {
  if (auto to = dfa_->next(current_, symbol)) {
    current_ = *to;
    trace_.push_back({symbol, current_});
    return Classification::Advance;
  }
  if (!trace_.empty() && trace_.back().cell == symbol) return Classification::ReexecStay;
  auto last = std::find_if(trace_.rbegin(), trace_.rend(), [&](const TraceStep& s) { return s.cell == symbol; });
  if (last != trace_.rend()) {
    current_ = last->state;
    trace_.erase(last.base(), trace_.end());
    return Classification::Backtrack;
  }
  return Classification::Deviation;
}

void Guide::step_back() {
  if (trace_.empty()) return;
  trace_.pop_back();
  current_ = trace_.empty() ? dfa_->start() : trace_.back().state;
}

void Guide::reset() {
  trace_.clear();
  current_ = dfa_->start();
}

bool Guide::in_trace(CellRef symbol) const {
  return std::any_of(trace_.begin(), trace_.end(), [&](const TraceStep& s) { return s.cell == symbol; });
}

Session::Session(NotebookDoc doc, std::shared_ptr<const Dfa> dfa) : doc_(std::move(doc)), guide_(std::move(dfa)) {}

namespace {

void require_valid(const ScriptAst& script, const NotebookDoc& doc) {
  auto report = validate_script(script, doc);
  for (const auto& issue : report.issues)
    if (issue.severity == Severity::Error) throw Error(ErrorCode::Validation, issue.message, issue.span);
}

}  // namespace

Session Session::start(const NotebookDoc& doc, const ScriptAst& script, const CompileLimits& limits) {
  require_valid(script, doc);
  return start(doc, script, std::make_shared<const Dfa>(compile(script, limits)));
}

Session Session::start(const NotebookDoc& doc, const ScriptAst& script, std::shared_ptr<const Dfa> dfa) {
  require_valid(script, doc);
  Session s(doc, std::move(dfa));
  s.log_ = read_log_trace(doc);
  for (const auto& e : s.log_.entries) s.next_ts_ = std::max(s.next_ts_, e.ts + 1);
  auto bind = [&](CellRef ref) { s.id_map_[doc.cell(*scenario_position(doc, ref)).stable_id] = ref; };
  for_each_cell(script.root, [&](const Node& n) {
    bind(n.code);
    auto& texts = s.text_assoc_[n.code];
    for (const auto& t : n.texts) {
      bind(t);
      texts.insert(t);
      s.text_owners_[t].insert(n.code);
    }
  });
  return s;
}

std::optional<CellRef> Session::scenario_ref(std::size_t position) const {
  auto it = id_map_.find(doc_.cell(position).stable_id);
  if (it == id_map_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Session::position_of(CellRef scenario) const {
  for (const auto& [id, ref] : id_map_)
    if (ref == scenario) return doc_.position_of(id);
  return std::nullopt;
}

NotebookDoc Session::snapshot() const {
  std::map<std::size_t, CellRef> tags;
  for (const auto& [id, ref] : id_map_)
    if (auto pos = doc_.position_of(id)) tags.emplace(*pos, ref);
  return write_log_trace(with_scenario_tags(doc_, tags), log_);
}

std::optional<std::size_t> Session::last_executed_position() const {
  if (!last_executed_) return std::nullopt;
  return doc_.position_of(*last_executed_);
}

ExecOutcome Session::execute_cell(std::size_t position) {
  const Cell& cell = doc_.cell(position);
  if (cell.kind != CellKind::Code)
    throw Error(ErrorCode::InvalidArgument, "T" + std::to_string(position) + " is not a code cell");
  last_executed_ = cell.stable_id;
  ExecOutcome out;
  auto ref = scenario_ref(position);
  if (!ref) {
    log_.entries.push_back({CellRef::code(position), next_ts_++, true});
    out.classification = Classification::White;
  } else {
    log_.entries.push_back({*ref, next_ts_++, false});
    out.classification = guide_.execute(*ref);
  }
  out.new_state = guide_.current();
  out.complete = guide_.complete();
  return out;
}

ExecOutcome Session::execute_cell(const CellRef& label) {
  const Cell& cell = doc_.cell(label.index);
  if (cell.kind != label.kind)
    throw Error(ErrorCode::InvalidArgument, label.label() + " does not name a cell of that kind");
  return execute_cell(label.index);
}

void Session::insert_cell(std::size_t position, CellKind kind) { doc_ = doc_.with_cell_inserted(position, kind); }

void Session::delete_cell(std::size_t position) {
  if (auto ref = scenario_ref(position))
    throw Error(ErrorCode::Forbidden, "cell at position " + std::to_string(position) + " (" + ref->label() +
                                          ") belongs to the scenario and cannot be deleted");
  doc_ = doc_.with_cell_removed(position);
}

Color Session::color_of(CellRef scenario) const {
  if (scenario.kind == CellKind::Code) {
    if (guide_.dfa().next(guide_.current(), scenario)) return Color::Green;
    if (guide_.in_trace(scenario)) return Color::Orange;
    return Color::Red;
  }
  Color best = Color::Red;
  if (auto it = text_owners_.find(scenario); it != text_owners_.end()) {
    for (const auto& code : it->second) {
      Color c = color_of(code);
      if (c == Color::Green) return c;
      if (c == Color::Orange) best = c;
    }
  }
  return best;
}

std::map<CellRef, Color> Session::colors() const {
  std::map<CellRef, Color> out;
  for (std::size_t pos = 0; pos < doc_.size(); ++pos) {
    auto ref = scenario_ref(pos);
    out[cell_label(doc_, pos)] = ref ? color_of(*ref) : Color::White;
  }
  return out;
}

std::vector<CellRef> Session::next_cells() const {
  std::vector<CellRef> out;
  for (std::size_t pos = 0; pos < doc_.size(); ++pos) {
    auto ref = scenario_ref(pos);
    if (ref && ref->kind == CellKind::Code && guide_.dfa().next(guide_.current(), *ref))
      out.push_back(CellRef::code(pos));
  }
  return out;
}

}  // namespace moon
