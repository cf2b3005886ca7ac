#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace topicforge {

namespace fs = std::filesystem;

// Curation API over project directories: <data_dir>/<project_id>/config.json
// plus the outputs the batch commands write under the config's output dir.
// Edits live in specs_log.jsonl, snapshots in snapshots/<id>/.
struct ServiceOptions {
  fs::path data_dir;
  unsigned threads = 1;
  // Test hook: extra time a recompute holds the writer slot.
  std::chrono::milliseconds recompute_delay{0};
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using QueryParams = std::multimap<std::string, std::string>;

class Project;

class CurationService {
 public:
  explicit CurationService(ServiceOptions options);
  ~CurationService();
  CurationService(const CurationService&) = delete;
  CurationService& operator=(const CurationService&) = delete;

  // Routes a request; `path` starts with /v1. Never throws.
  HttpResponse handle(std::string_view method, std::string_view path, const QueryParams& query,
                      std::string_view body);

  const ServiceOptions& options() const { return options_; }

 private:
  std::shared_ptr<Project> project(const std::string& id);

  ServiceOptions options_;
  std::mutex projects_mutex_;
  std::map<std::string, std::shared_ptr<Project>> projects_;
};

// Thin HTTP/1.1 front end for CurationService.
class HttpServer {
 public:
  explicit HttpServer(CurationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns the bound port (port 0 picks a free one); throws on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Splits "host:port"; a bare port means 127.0.0.1.
std::pair<std::string, int> parse_listen_address(std::string_view text);

}  // namespace topicforge
