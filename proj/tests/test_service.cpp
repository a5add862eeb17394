#include <doctest.h>

#include <atomic>
#include <functional>
#include <thread>

#include <httplib.h>

#include "moon/error.hpp"
#include "moon/service.hpp"
#include "support.hpp"

using namespace moon;

namespace {

Json course_json() { return Json::parse(moon::test::read_file(moon::test::data_path("image_course.ipynb"))); }

std::string color_of(const Json& view, const std::string& label) {
  for (const auto& c : view["cells"])
    if (c["label"] == label) return c["color"].get<std::string>();
  return "";
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

struct LiveServer {
  SessionRegistry registry;
  Server server{registry};
  int port = server.bind("127.0.0.1", 0);
  std::thread thread{[this] { server.run(); }};

  LiveServer() {
    while (!server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~LiveServer() {
    registry.shutdown();
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("registry lifecycle") {
  SessionRegistry reg;
  auto a = reg.create(course_json(), moon::test::kImageCourseScript);
  auto b = reg.create(course_json().dump(), moon::test::kImageCourseScript);
  CHECK(a.id != b.id);
  CHECK(a.id.size() == 32);
  CHECK(reg.size() == 2);
  CHECK(color_of(a.view, "C1") == "green");
  CHECK(a.view["next_cells"] == Json::array({"C1"}));
  CHECK(a.view["version"] == 0);
  CHECK(a.view["complete"] == false);
  CHECK(a.view["state"] == "q0");

  auto r = reg.post_action(a.id, Json{{"action", "execute"}, {"cell", "C1"}});
  CHECK(r["outcome"]["classification"] == "advance");
  CHECK(r["outcome"]["state"] == "q1");
  CHECK(color_of(r["view"], "C1") == "orange");
  CHECK(color_of(r["view"], "C3") == "green");
  CHECK(r["view"]["version"] == 1);
  CHECK(reg.view(b.id)["version"] == 0);

  auto before = reg.view(a.id);
  CHECK(code_of([&] { reg.post_action(a.id, Json{{"action", "delete"}, {"position", 1}}); }) == ErrorCode::Forbidden);
  CHECK(reg.view(a.id) == before);

  reg.post_action(b.id, Json{{"action", "back"}});
  reg.post_action(b.id, Json{{"action", "back"}});
  CHECK(reg.view(b.id)["version"] == 2);

  auto snap = reg.post_action(a.id, Json{{"action", "snapshot"}});
  CHECK(snap["view"]["version"] == 1);
  CHECK(snap["notebook"]["metadata"][kMetadataKey].size() == 1);

  CHECK(code_of([&] { reg.view("nope"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { reg.post_action(a.id, Json{{"action", "jump"}}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { reg.post_action(a.id, Json{{"action", "insert"}, {"position", -1}}); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([&] { reg.create(course_json(), "(C1"); }) == ErrorCode::Syntax);
}

TEST_CASE("trace snapshots") {
  SessionRegistry reg;
  auto s = reg.create(course_json(), moon::test::kPartsScript);
  CHECK(reg.trace(s.id)["user_trace"].empty());
  for (const char* c : {"C7", "C12", "C18"}) reg.post_action(s.id, Json{{"action", "execute"}, {"cell", c}});
  auto t = reg.trace(s.id);
  CHECK(t["user_trace"] == Json::array({Json{{"cell", "C7"}, {"state", "q1"}}, Json{{"cell", "C12"}, {"state", "q3"}}}));
  CHECK(t["log_trace"].size() == 3);
}

TEST_CASE("view colors follow the session") {
  SessionRegistry reg;
  auto s = reg.create(course_json(), moon::test::kImageCourseScript);
  reg.post_action(s.id, Json{{"action", "insert"}, {"position", 4}, {"kind", "code"}});
  auto v = reg.view(s.id);
  CHECK(v["cells"].size() == 20);
  CHECK(color_of(v, "C4") == "white");
  CHECK(v["cells"][4]["emoji"] == "✏");
  CHECK(v["cells"][6]["label"] == "C6");
  CHECK(v["cells"][6]["id"] == "cell-05");
  reg.post_action(s.id, Json{{"action", "delete"}, {"position", 4}});
  CHECK(reg.view(s.id)["cells"].size() == 19);
}

TEST_CASE("concurrent actions are serialised per session") {
  SessionRegistry reg;
  auto s = reg.create(course_json(), moon::test::kPartsScript);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) reg.post_action(s.id, Json{{"action", "execute"}, {"cell", "C7"}});
    });
  for (auto& t : threads) t.join();
  CHECK(reg.version(s.id) == 100);
  CHECK(reg.trace(s.id)["log_trace"].size() == 100);
}

TEST_CASE("wait_for_update") {
  SessionRegistry reg;
  auto s = reg.create(course_json(), moon::test::kPartsScript);
  CHECK_FALSE(reg.wait_for_update(s.id, 0, std::chrono::milliseconds(10)));
  std::thread t([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    reg.post_action(s.id, Json{{"action", "reset"}});
  });
  auto v = reg.wait_for_update(s.id, 0, std::chrono::seconds(5));
  t.join();
  REQUIRE(v);
  CHECK((*v)["version"] == 1);
}

TEST_CASE("HTTP endpoints") {
  LiveServer live;
  REQUIRE(live.port > 0);
  httplib::Client cli("127.0.0.1", live.port);

  auto res = cli.Post("/sessions", Json{{"notebook", course_json()}, {"script", moon::test::kImageCourseScript}}.dump(),
                      "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  auto created = Json::parse(res->body);
  const std::string id = created["id"];
  CHECK(color_of(created["view"], "C1") == "green");

  res = cli.Post("/sessions", Json{{"notebook", course_json()}, {"script", "(C1 ]"}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 422);
  auto err = Json::parse(res->body);
  CHECK(err["error"]["code"] == "syntax");
  CHECK(err["error"]["span"]["begin"] == 4);

  res = cli.Post("/sessions", "not json", "application/json");
  CHECK(res->status == 400);

  res = cli.Post("/sessions/" + id + "/actions", R"({"action":"execute","cell":"C1"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  auto body = Json::parse(res->body);
  CHECK(body["outcome"]["classification"] == "advance");
  CHECK(color_of(body["view"], "C3") == "green");

  res = cli.Post("/sessions/" + id + "/actions", R"({"action":"delete","position":1})", "application/json");
  CHECK(res->status == 403);
  body = Json::parse(res->body);
  CHECK(body["error"]["code"] == "forbidden");
  CHECK(body["view"]["version"] == 1);

  res = cli.Get("/sessions/" + id);
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body)["view"]["version"] == 1);

  res = cli.Get("/sessions/" + id + "/trace");
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body)["user_trace"].size() == 1);

  res = cli.Get("/sessions/0123456789abcdef0123456789abcdef");
  CHECK(res->status == 404);
  CHECK(Json::parse(res->body)["error"]["code"] == "not-found");
  res = cli.Get("/sessions/xyz");
  CHECK(res->status == 404);
}

TEST_CASE("event stream pushes views") {
  LiveServer live;
  auto created = live.registry.create(course_json(), moon::test::kPartsScript);
  httplib::Client cli("127.0.0.1", live.port);
  cli.set_read_timeout(std::chrono::seconds(10));

  std::vector<Json> views;
  std::string buffer;
  std::atomic<bool> posted{false};
  std::thread poster;
  auto res = cli.Get("/sessions/" + created.id + "/events", [&](const char* data, std::size_t len) {
    buffer.append(data, len);
    std::size_t end;
    while ((end = buffer.find("\n\n")) != std::string::npos) {
      std::string event = buffer.substr(0, end);
      buffer.erase(0, end + 2);
      auto at = event.find("data: ");
      if (at != std::string::npos) views.push_back(Json::parse(event.substr(at + 6)));
    }
    if (views.size() == 1 && !posted) {
      posted = true;
      poster = std::thread([&] { live.registry.post_action(created.id, Json{{"action", "execute"}, {"cell", "C7"}}); });
    }
    return views.size() < 2;
  });
  if (poster.joinable()) poster.join();
  REQUIRE(views.size() == 2);
  CHECK(views[0]["version"] == 0);
  CHECK(views[1]["version"] == 1);
  CHECK(views[1]["state"] == "q1");
}
