#include "oacmab/http.hpp"

#include <httplib.h>

#include <exception>

namespace oacmab {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ServiceError::bad_request(std::string("malformed JSON body: ") + e.what());
  }
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn, int ok_status = 200) {
  return [fn, ok_status](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, ok_status, fn(req));
    } catch (const ServiceError& e) {
      send_json(res, e.status(), e.body());
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}, {"code", "internal"}});
    }
  };
}

}  // namespace

void install_routes(httplib::Server& server, SessionStore& store) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", guarded([&store](const httplib::Request& req) { return store.create(parse_body(req)); }, 201));
  server.Get(R"(/sessions/([^/]+))", guarded([&store](const httplib::Request& req) {
               return store.state(req.matches[1]);
             }));
  server.Post(R"(/sessions/([^/]+)/advance)", guarded([&store](const httplib::Request& req) {
                return store.advance(req.matches[1], parse_body(req));
              }));
  server.Get(R"(/sessions/([^/]+)/pending)", guarded([&store](const httplib::Request& req) {
               return store.pending(req.matches[1]);
             }));
  server.Post(R"(/sessions/([^/]+)/observations)", guarded([&store](const httplib::Request& req) {
                return store.submit(req.matches[1], parse_body(req));
              }));
  server.Get(R"(/sessions/([^/]+)/efe)", guarded([&store](const httplib::Request& req) {
               return store.efe(req.matches[1]);
             }));
  server.Post(R"(/sessions/([^/]+)/snapshot)", guarded([&store](const httplib::Request& req) {
                return json{{"path", store.save_snapshot(req.matches[1]).string()}};
              }));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_json(res, res.status, {{"error", "no such route"}, {"code", "not_found"}});
  });
}

}  // namespace oacmab
