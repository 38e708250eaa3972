#include "enthymeme/annotation_server.hpp"

#include <httplib.h>

#include <cstdlib>
#include <map>
#include <set>

#include "enthymeme/error.hpp"
#include "enthymeme/text.hpp"

namespace enthymeme::annotation {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  httplib::Server server;

  explicit Impl(AnnotationStore& s) : store(s) {}

  json progress(const std::string& annotator) const {
    std::size_t open = 0;
    std::map<std::string, std::size_t> counts;
    std::set<std::string> mine;
    for (const auto& j : store.judgments()) {
      ++counts[j.item_id];
      if (j.annotator_id == annotator) mine.insert(j.item_id);
    }
    for (const auto& item : store.batch()) {
      if (mine.count(item.item_id) == 0 &&
          counts[item.item_id] < static_cast<std::size_t>(item.required_judges)) {
        ++open;
      }
    }
    return {{"done", mine.size()}, {"remaining", open}};
  }

  void routes() {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });

    server.Get("/items/next", [this](const httplib::Request& req, httplib::Response& res) {
      const auto annotator = req.get_param_value("annotator");
      if (annotator.empty()) return send_error(res, 400, "annotator query parameter is required");
      auto item = store.next_item(annotator);
      if (!item) {
        res.status = 204;
        return;
      }
      auto body = to_json(*item);
      body["progress"] = progress(annotator);
      send_json(res, 200, body);
    });

    server.Post("/judgments", [this](const httplib::Request& req, httplib::Response& res) {
      JudgmentRecord record;
      try {
        const auto body = json::parse(req.body);
        record.item_id = body.at("item_id").get<std::string>();
        record.annotator_id = body.at("annotator_id").get<std::string>();
        record.plausible = body.at("plausible").get<bool>();
      } catch (const json::exception& e) {
        return send_error(res, 400, std::string("bad judgment: ") + e.what());
      }
      try {
        const auto ack = store.submit_judgment(record);
        auto body = to_json(ack.record);
        body["duplicate"] = ack.duplicate;
        send_json(res, ack.duplicate ? 200 : 201, body);
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      }
    });

    server.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
      const auto report = store.report(false);
      auto body = to_json(report);
      body["table"] = format_table(report);
      send_json(res, 200, body);
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });
  }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(store)) {
  impl_->routes();
  if (ui_dir) {
    if (!impl_->server.set_mount_point("/ui", ui_dir->string())) {
      throw IoError("ui directory not found: " + ui_dir->string());
    }
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

bool AnnotationServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int AnnotationServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool AnnotationServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void AnnotationServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void AnnotationServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

int port_from_env() {
  const char* raw = std::getenv("ANNOTATION_PORT");
  if (raw == nullptr || *raw == '\0') return 8080;
  char* end = nullptr;
  const long port = std::strtol(raw, &end, 10);
  if (*end != '\0' || port < 1 || port > 65535) throw ValidationError(std::string("bad ANNOTATION_PORT: ") + raw);
  return static_cast<int>(port);
}

}  // namespace enthymeme::annotation
