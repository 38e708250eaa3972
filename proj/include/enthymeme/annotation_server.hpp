#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "enthymeme/annotation.hpp"

namespace enthymeme::annotation {

/// JSON API over an AnnotationStore:
///   GET  /items/next?annotator=ID -> 200 item | 204 when exhausted
///   POST /judgments {item_id, annotator_id, plausible} -> 201 | 200 (exact repeat) | 409 | 404 | 400
///   GET  /report, GET /health
/// Static files under /ui when a directory is given.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Blocks until stop(). Returns false if the port could not be bound.
  bool listen(const std::string& host, int port);
  // For tests: bind an ephemeral port, then serve with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ANNOTATION_PORT, defaulting to 8080.
int port_from_env();

}  // namespace enthymeme::annotation
