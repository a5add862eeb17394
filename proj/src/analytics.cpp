#include "moon/analytics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <memory>

#include "moon/error.hpp"
#include "moon/session.hpp"

namespace moon {

const char* to_string(ExecClass c) noexcept {
  switch (c) {
    case ExecClass::Green: return "green";
    case ExecClass::Orange: return "orange";
    case ExecClass::Red: return "red";
  }
  return "?";
}

LogTrace simplify_trace(const LogTrace& log) {
  LogTrace out;
  for (const auto& e : log.entries) {
    if (!out.entries.empty() && out.entries.back().cell == e.cell && out.entries.back().white == e.white) continue;
    out.entries.push_back(e);
  }
  return out;
}

AnnotatedTrace classify_replay(const LogTrace& log, const Dfa& dfa) {
  // Non-owning alias: the guide only lives for this call.
  Guide guide(std::shared_ptr<const Dfa>(std::shared_ptr<const Dfa>{}, &dfa));
  AnnotatedTrace out;
  for (const auto& e : log.entries) {
    if (e.white) continue;
    ExecClass cls = ExecClass::Red;
    switch (guide.execute(e.cell)) {
      case Classification::Advance: cls = ExecClass::Green; ++out.green; break;
      case Classification::ReexecStay:
      case Classification::Backtrack: cls = ExecClass::Orange; ++out.orange; break;
      default: ++out.red; break;
    }
    out.entries.emplace_back(e.cell, cls);
  }
  return out;
}

Fraction fitness(const AnnotatedTrace& a) {
  const std::uint64_t total = a.green + a.orange + a.red;
  if (total == 0) throw Error(ErrorCode::UndefinedMetric, "fitness is undefined for an empty trace");
  return {a.green + a.orange, total};
}

std::size_t completeness(const LogTrace& log, const std::set<CellRef>& scenario) {
  std::set<CellRef> seen;
  for (const auto& e : log.entries)
    if (!e.white && scenario.count(e.cell)) seen.insert(e.cell);
  return seen.size();
}

std::set<CellRef> scenario_cells(const ScriptAst& script) {
  std::set<CellRef> out;
  for_each_cell(script.root, [&](const Node& n) { out.insert(n.code); });
  return out;
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CohortReport cohort_report(const std::vector<CohortEntry>& notebooks, const ScriptAst& script,
                           const CompileLimits& limits) {
  const Dfa dfa = compile(script, limits);
  const auto scenario = scenario_cells(script);
  CohortReport report;
  for (const auto& nb : notebooks) {
    CohortRow row;
    row.id = nb.id;
    if (!nb.doc) {
      row.error = nb.load_error.empty() ? "notebook could not be loaded" : nb.load_error;
      report.rows.push_back(std::move(row));
      continue;
    }
    try {
      auto validation = validate_script(script, *nb.doc);
      if (!validation.ok()) {
        for (const auto& i : validation.issues)
          if (i.severity == Severity::Error) throw Error(ErrorCode::Validation, i.message);
      }
      const LogTrace log = read_log_trace(*nb.doc);
      const AnnotatedTrace annotated = classify_replay(simplify_trace(log), dfa);
      row.green = annotated.green;
      row.orange = annotated.orange;
      row.red = annotated.red;
      if (annotated.green + annotated.orange + annotated.red > 0) row.fitness = fitness(annotated);
      row.completeness = completeness(log, scenario);
    } catch (const Error& e) {
      row = CohortRow{};
      row.id = nb.id;
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const CohortRow& a, const CohortRow& b) { return a.id < b.id; });

  std::vector<double> g, o, r, f, c;
  for (const auto& row : report.rows) {
    if (!row.error.empty()) continue;
    g.push_back(static_cast<double>(row.green));
    o.push_back(static_cast<double>(row.orange));
    r.push_back(static_cast<double>(row.red));
    c.push_back(static_cast<double>(row.completeness));
    if (row.fitness) f.push_back(row.fitness->value());
  }
  if (!g.empty()) {
    auto pick = [](const std::vector<double>& v, int which) {
      if (which == 0) return *std::min_element(v.begin(), v.end());
      if (which == 2) return *std::max_element(v.begin(), v.end());
      return median(v);
    };
    const char* labels[] = {"min", "median", "max"};
    for (int w = 0; w < 3; ++w) {
      CohortSummary s;
      s.label = labels[w];
      s.green = pick(g, w);
      s.orange = pick(o, w);
      s.red = pick(r, w);
      s.completeness = pick(c, w);
      if (!f.empty()) s.fitness = pick(f, w);
      report.summary.push_back(s);
    }
  }
  return report;
}

std::string CohortReport::to_csv() const {
  std::string out = std::string(kCohortHeader) + "\n";
  for (const auto& row : rows) {
    if (!row.error.empty()) {
      out += csv_field(row.id) + ",,,," + csv_field("error: " + row.error) + ",\n";
      continue;
    }
    out += csv_field(row.id) + "," + std::to_string(row.green) + "," + std::to_string(row.orange) + "," +
           std::to_string(row.red) + "," + (row.fitness ? format_number(row.fitness->value()) : "undefined") + "," +
           std::to_string(row.completeness) + "\n";
  }
  for (const auto& s : summary) {
    out += s.label + "," + format_number(s.green) + "," + format_number(s.orange) + "," + format_number(s.red) +
           "," + (s.fitness ? format_number(*s.fitness) : "undefined") + "," + format_number(s.completeness) + "\n";
  }
  return out;
}

}  // namespace moon
