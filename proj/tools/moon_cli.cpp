// Command-line front end. Talks to the engine only through the C interface.

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <csignal>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "moon/moon.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

template <auto Free>
struct Deleter {
  template <typename T>
  void operator()(T* p) const { Free(p); }
};
using NotebookPtr = std::unique_ptr<moon_notebook, Deleter<moon_notebook_free>>;
using ScriptPtr = std::unique_ptr<moon_script, Deleter<moon_script_free>>;
using DfaPtr = std::unique_ptr<moon_dfa, Deleter<moon_dfa_free>>;
using ServerPtr = std::unique_ptr<moon_server, Deleter<moon_server_free>>;

/// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  moon_string_free(s);
  return out;
}

struct Failure {
  std::string message;
};

void check(moon_status st) {
  if (st != MOON_OK) throw Failure{std::string(moon_status_name(st)) + ": " + moon_last_error()};
}

std::string number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

struct Options {
  std::string script;
  std::vector<std::string> args;
  std::string script_file;
  std::size_t max_any = 6;
  std::size_t max_states = 10000;
  bool with_loops = false;
  bool entries = false;
  bool stamp = false;
  std::string output;
  std::string host = "127.0.0.1";
  int port = 8765;
};

class Cli {
 public:
  explicit Cli(Options opts) : o_(std::move(opts)) {
    moon_limits_default(&limits_);
    limits_.max_any_elements = o_.max_any;
    limits_.max_states = o_.max_states;
  }

  /// Script text; with --script-file every positional is an input.
  std::string script_text() {
    rest_ = o_.args;
    if (!o_.script_file.empty()) {
      std::ifstream in(o_.script_file);
      if (!in) throw Failure{"cannot read script file " + o_.script_file};
      std::ostringstream buf;
      buf << in.rdbuf();
      if (!o_.script.empty()) rest_.insert(rest_.begin(), o_.script);
      return buf.str();
    }
    if (o_.script.empty()) throw Usage{"missing script"};
    return o_.script;
  }

  ScriptPtr parse_script(const std::string& text) {
    moon_script* raw = nullptr;
    moon_status st = moon_script_parse(text.c_str(), &raw);
    if (st != MOON_OK) {
      std::string msg = std::string(moon_status_name(st)) + ": " + moon_last_error();
      std::size_t begin = 0, end = 0;
      if (moon_last_error_span(&begin, &end)) {
        msg += "\n  " + first_line(text) + "\n  " + std::string(begin, ' ') +
               std::string(std::max<std::size_t>(1, end - begin), '^');
      }
      throw Failure{msg};
    }
    return ScriptPtr(raw);
  }

  NotebookPtr load(const std::string& path) {
    moon_notebook* raw = nullptr;
    check(moon_notebook_load(path.c_str(), &raw));
    return NotebookPtr(raw);
  }

  DfaPtr compile(const moon_script* script) {
    moon_dfa* raw = nullptr;
    check(moon_dfa_compile(script, &limits_, &raw));
    return DfaPtr(raw);
  }

  int run_compile() {
    auto script = parse_script(script_text());
    expect_args(0, "compile takes only a script");
    auto dfa = compile(script.get());
    std::cout << "states: " << moon_dfa_state_count(dfa.get()) << "\n"
              << "transitions: " << moon_dfa_transition_count(dfa.get()) << "\n"
              << "accepting: " << moon_dfa_accepting_count(dfa.get()) << "\n"
              << "alphabet: " << moon_dfa_alphabet_size(dfa.get()) << "\n";
    return kExitOk;
  }

  int run_validate() {
    auto script = parse_script(script_text());
    expect_args(1, "validate needs <script> <notebook>");
    auto nb = load(rest_[0]);
    int ok = 0;
    char* out = nullptr;
    check(moon_script_validate(script.get(), nb.get(), &ok, &out));
    json report = json::parse(take(out));
    for (const auto& issue : report["issues"])
      std::cout << issue["severity"].get<std::string>() << ": " << issue["message"].get<std::string>() << "\n";
    std::cout << (ok ? "ok" : "invalid") << "\n";
    return ok ? kExitOk : kExitFailure;
  }

  int run_export_dot() {
    auto script = parse_script(script_text());
    expect_args(0, "export-dot takes only a script");
    auto dfa = compile(script.get());
    if (o_.with_loops) {
      moon_dfa* decorated = nullptr;
      check(moon_dfa_decorate_reexec_loops(dfa.get(), &decorated));
      dfa.reset(decorated);
    }
    char* out = nullptr;
    check(moon_dfa_export_dot(dfa.get(), &out));
    std::cout << take(out);
    return kExitOk;
  }

  int run_replay() {
    auto script = parse_script(script_text());
    if (rest_.empty()) throw Usage{"replay needs at least one notebook"};
    int status = kExitOk;
    for (const auto& path : rest_) {
      try {
        auto nb = load(path);
        char* out = nullptr;
        check(moon_replay(script.get(), nb.get(), &limits_, &out));
        json r = json::parse(take(out));
        std::cout << path << ": g=" << r["g"] << " o=" << r["o"] << " r=" << r["r"]
                  << " fitness=" << (r["fitness"].is_null() ? "undefined" : number(r["fitness"].get<double>()))
                  << " completeness=" << r["completeness"] << "\n";
        if (o_.entries)
          for (const auto& e : r["entries"])
            std::cout << "  " << e["cell"].get<std::string>() << " " << e["class"].get<std::string>() << "\n";
      } catch (const Failure& f) {
        std::cerr << "error: " << path << ": " << f.message << "\n";
        status = kExitFailure;
      }
    }
    return status;
  }

  int run_report() {
    auto script = parse_script(script_text());
    expect_args(1, "report needs <script> <dir>");
    const fs::path dir = rest_[0];
    if (!fs::is_directory(dir)) throw Failure{dir.string() + " is not a directory"};
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".ipynb") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<std::string> ids, errors;
    std::vector<NotebookPtr> owned;
    for (const auto& f : files) {
      ids.push_back(f.filename().string());
      moon_notebook* raw = nullptr;
      moon_status st = moon_notebook_load(f.string().c_str(), &raw);
      owned.emplace_back(raw);
      errors.push_back(st == MOON_OK ? "" : std::string(moon_status_name(st)) + ": " + moon_last_error());
    }
    std::vector<const char*> id_ptrs, err_ptrs;
    std::vector<const moon_notebook*> nb_ptrs;
    for (std::size_t i = 0; i < files.size(); ++i) {
      id_ptrs.push_back(ids[i].c_str());
      err_ptrs.push_back(errors[i].empty() ? nullptr : errors[i].c_str());
      nb_ptrs.push_back(owned[i].get());
    }
    char* out = nullptr;
    check(moon_cohort_report(script.get(), id_ptrs.data(), nb_ptrs.data(), err_ptrs.data(), files.size(), &limits_,
                             &out));
    std::string csv = take(out);
    if (o_.stamp) {
      std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      char buf[32];
      std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
      csv = std::string("# generated ") + buf + "\n" + csv;
    }
    if (o_.output.empty()) {
      std::cout << csv;
    } else {
      std::ofstream f(o_.output, std::ios::binary);
      if (!(f << csv)) throw Failure{"cannot write " + o_.output};
    }
    return kExitOk;
  }

  int run_serve() {
    std::string text = script_text();
    auto script = parse_script(text);
    expect_args(1, "serve needs <script> <notebook>");
    auto nb = load(rest_[0]);
    moon_server* raw = nullptr;
    check(moon_server_create(&limits_, &raw));
    ServerPtr server(raw);
    char* id = nullptr;
    check(moon_server_add_session(server.get(), nb.get(), text.c_str(), &id));
    std::string session_id = take(id);
    int port = 0;
    check(moon_server_bind(server.get(), o_.host.c_str(), o_.port, &port));
    std::cout << "listening on http://" << o_.host << ":" << port << "\n"
              << "session " << session_id << std::endl;
    active_server = server.get();
    std::signal(SIGINT, [](int) { moon_server_stop(active_server); });
    std::signal(SIGTERM, [](int) { moon_server_stop(active_server); });
    check(moon_server_run(server.get()));
    active_server = nullptr;
    return kExitOk;
  }

  struct Usage {
    std::string message;
  };

 private:
  Options o_;
  moon_limits limits_{};
  std::vector<std::string> rest_;
  static inline moon_server* active_server = nullptr;

  void expect_args(std::size_t n, const char* what) {
    if (rest_.size() != n) throw Usage{what};
  }

  static std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario scripts for notebooks: compile, validate, replay, report, serve"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    // A string positional is never split as a "[a,b]" list, so any-order scripts survive.
    sub->add_option("script", o.script, "scenario script");
    sub->add_option("inputs", o.args, "notebooks or directory");
    sub->add_option("--script-file", o.script_file, "read the script from a file");
    sub->add_option("--max-any", o.max_any, "largest any-order group")->envname("MOON_MAX_ANY")->check(CLI::PositiveNumber);
    sub->add_option("--max-states", o.max_states, "largest automaton")->check(CLI::PositiveNumber);
  };

  auto* compile = app.add_subcommand("compile", "print automaton statistics");
  add_common(compile);
  auto* validate = app.add_subcommand("validate", "check a script against a notebook");
  add_common(validate);
  auto* dot = app.add_subcommand("export-dot", "print the automaton in graphviz format");
  add_common(dot);
  dot->add_flag("--with-reexec-loops", o.with_loops, "add re-execution self-loops");
  auto* replay = app.add_subcommand("replay", "classify the log traces stored in notebooks");
  add_common(replay);
  replay->add_flag("--entries", o.entries, "print every classified execution");
  auto* report = app.add_subcommand("report", "cohort metrics of all notebooks in a directory as CSV");
  add_common(report);
  report->add_option("-o,--output", o.output, "write the table to a file");
  report->add_flag("--stamp", o.stamp, "prefix the table with a generation time comment");
  auto* serve = app.add_subcommand("serve", "run the session service for one notebook");
  add_common(serve);
  serve->add_option("--host", o.host, "address to listen on");
  serve->add_option("--port", o.port, "port to listen on (0 picks one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  Cli cli(o);
  try {
    if (*compile) return cli.run_compile();
    if (*validate) return cli.run_validate();
    if (*dot) return cli.run_export_dot();
    if (*replay) return cli.run_replay();
    if (*report) return cli.run_report();
    if (*serve) return cli.run_serve();
  } catch (const Cli::Usage& u) {
    std::cerr << "usage error: " << u.message << "\n" << app.help();
    return kExitUsage;
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
