#include "dqlens/http_server.hpp"

#include "dqlens/error.hpp"

#include <httplib.h>

#include <functional>
#include <string_view>

namespace dqlens {
namespace {

using nlohmann::json;

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, const json& detail = nullptr) {
  res.status = http_status(code);
  res.set_content(json{{"code", to_string(code)}, {"message", message}, {"detail", detail}}.dump(),
                  "application/json");
}

void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what(), e.detail());
  } catch (const json::exception& e) {
    send_error(res, ErrorCode::BadRequest, e.what());
  } catch (const std::bad_alloc&) {
    send_error(res, ErrorCode::PayloadTooLarge, "out of memory");
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("request body is not JSON: ") + e.what());
  }
}

const std::string& path_param(const httplib::Request& req, const char* key) {
  auto it = req.path_params.find(key);
  if (it == req.path_params.end()) throw Error(ErrorCode::BadRequest, std::string("missing path parameter ") + key);
  return it->second;
}

std::optional<std::string> form_field(const httplib::Request& req, const char* key) {
  if (req.has_file(key)) return req.get_file_value(key).content;
  if (req.has_param(key)) return req.get_param_value(key);
  return std::nullopt;
}

LoadOptions options_from_form(const httplib::Request& req) {
  json j = json::object();
  if (auto v = form_field(req, "separator")) j["separator"] = *v;
  if (auto v = form_field(req, "quote")) j["quote"] = *v;
  if (auto v = form_field(req, "has_header")) j["has_header"] = (*v == "true" || *v == "1");
  if (auto v = form_field(req, "missing_tokens")) {
    try {
      j["missing_tokens"] = json::parse(*v);
    } catch (const json::exception&) {
      throw Error(ErrorCode::InvalidOptions, "missing_tokens must be a JSON array of strings");
    }
  }
  return load_options_from_json(j);
}

std::string stem_of(const std::string& filename) {
  auto base = filename.substr(filename.find_last_of("/\\") + 1);
  const auto dot = base.rfind('.');
  return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

FilterSpec filter_in(const json& body) {
  return filter_from_json(body.contains("filter") ? body["filter"] : body);
}

std::optional<std::string> relation_in(const json& body) {
  if (body.contains("relation") && !body["relation"].is_null()) return body["relation"].get<std::string>();
  return std::nullopt;
}

}  // namespace

struct HttpServer::Impl {
  Workbench& wb;
  httplib::Server server;

  explicit Impl(Workbench& w) : wb(w) {}

  void routes(const std::filesystem::path& static_dir) {
    const std::string p = kApiPrefix;
    server.set_payload_max_length(static_cast<std::size_t>(wb.config().upload_cap));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 413) {
        send_error(res, ErrorCode::PayloadTooLarge, "request exceeds the upload cap");
      } else if (res.status == 404) {
        send_error(res, ErrorCode::BadRequest, "no such endpoint");
        res.status = 404;
      }
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json{{"code", "Internal"}, {"message", what}, {"detail", nullptr}}.dump(), "application/json");
    });

    server.Get(p + "/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}});
    });

    server.Get(p + "/workspace", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.workspace_state()); });
    });

    server.Post(p + "/sessions", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        wb.expire_idle_sessions();
        send_json(res, {{"session_id", wb.create_session()}}, 201);
      });
    });

    server.Get(p + "/sessions/:sid", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.session_state(path_param(req, "sid"))); });
    });

    server.Post(p + "/sessions/:sid/workspace/save", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.save_workspace(path_param(req, "sid"))); });
    });

    server.Post(p + "/sessions/:sid/relations", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto& sid = path_param(req, "sid");
        if (req.is_multipart_form_data()) {
          if (!req.has_file("file")) throw Error(ErrorCode::BadRequest, "multipart upload needs a 'file' part");
          const auto& file = req.get_file_value("file");
          auto name = form_field(req, "name").value_or(stem_of(file.filename));
          if (name.empty()) throw Error(ErrorCode::BadRequest, "relation name is required");
          send_json(res, wb.load_relation(sid, file.content, name, options_from_form(req)), 201);
          return;
        }
        const auto body = body_json(req);
        const auto name = body.at("name").get<std::string>();
        const auto content = body.at("content").get<std::string>();
        const auto opts = load_options_from_json(body.value("options", json::object()));
        send_json(res, wb.load_relation(sid, content, name, opts), 201);
      });
    });

    server.Delete(p + "/sessions/:sid/relations/:name", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.discard_relation(path_param(req, "sid"), path_param(req, "name"))); });
    });

    server.Get(p + "/relations/:name", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.relation_summary(path_param(req, "name"))); });
    });

    server.Post(p + "/sessions/:sid/filter", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        const auto& sid = path_param(req, "sid");
        if (body.contains("op")) {
          send_json(res, wb.compose(sid, set_op_from_string(body["op"].get<std::string>()), filter_in(body),
                                    relation_in(body)));
        } else {
          send_json(res, wb.apply_filter(sid, filter_in(body), relation_in(body)));
        }
      });
    });

    server.Post(p + "/sessions/:sid/selection/compose", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        send_json(res, wb.compose(path_param(req, "sid"), set_op_from_string(body.at("op").get<std::string>()),
                                  filter_in(body), relation_in(body)));
      });
    });

    server.Post(p + "/sessions/:sid/selection/items", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        send_json(res, wb.select_by_items(path_param(req, "sid"), body.at("frame_id").get<std::string>(),
                                          body.at("item_ids").get<std::vector<std::uint32_t>>()));
      });
    });

    server.Put(p + "/sessions/:sid/scene", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        send_json(res, wb.set_scene(path_param(req, "sid"), scene_from_json(body.contains("scene") ? body["scene"] : body)));
      });
    });

    server.Get(p + "/sessions/:sid/frame", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto frame = wb.get_frame(path_param(req, "sid"));
        res.set_header("X-Frame-Id", frame.id);
        res.set_header("ETag", "\"" + frame.id + "\"");
        res.set_content(std::move(frame.json), "application/json");
      });
    });

    server.Post(p + "/sessions/:sid/zoom", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        ZoomWindows w;
        for (const auto& [attr, v] : body.at("window").items()) {
          if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::InvalidScene, "zoom window must be [lo, hi]");
          w[attr] = ValueWindow{v[0].get<double>(), v[1].get<double>()};
        }
        send_json(res, wb.refine_zoom(path_param(req, "sid"), w));
      });
    });

    server.Post(p + "/sessions/:sid/reset", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.reset(path_param(req, "sid"))); });
    });

    server.Post(p + "/sessions/:sid/marks", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        send_json(res,
                  wb.mark_items(path_param(req, "sid"), body.at("frame_id").get<std::string>(),
                                body.at("item_ids").get<std::vector<std::uint32_t>>(), body.value("label", std::string())),
                  201);
      });
    });

    server.Get(p + "/sessions/:sid/marks", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, wb.marks(path_param(req, "sid"))); });
    });

    server.Post(p + "/sessions/:sid/snapshots", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_json(req);
        send_json(res, wb.take_snapshot(path_param(req, "sid"), body.at("frame_id").get<std::string>()), 201);
      });
    });

    server.Get(p + "/snapshots/:id", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { res.set_content(wb.snapshot_text(path_param(req, "id")), "application/json"); });
    });

    server.Get(p + "/sessions/:sid/log", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { res.set_content(wb.session_log(path_param(req, "sid")), "application/x-ndjson"); });
    });

    if (!static_dir.empty()) server.set_mount_point("/", static_dir.string());
  }
};

HttpServer::HttpServer(Workbench& wb, std::filesystem::path static_dir) : impl_(std::make_unique<Impl>(wb)) {
  impl_->routes(static_dir);
}

HttpServer::~HttpServer() = default;

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int HttpServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }
void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }
void HttpServer::stop() { impl_->server.stop(); }

}  // namespace dqlens
