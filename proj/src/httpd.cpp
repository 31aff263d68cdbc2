#include "cvanet/httpd.hpp"

#include <sys/socket.h>

#include <charconv>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <stop_token>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cvanet/error.hpp"
#include "cvanet/json_io.hpp"
#include "cvanet/pipeline.hpp"

namespace cvanet {

namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", kJson);
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<std::string>& errors = {}) {
  send_json(res, status, {{"error", message}, {"errors", errors.empty() ? std::vector{message} : errors}});
}

std::optional<std::size_t> parse_count(const std::string& text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<TraceFormat> format_for_content_type(std::string content_type) {
  const auto semi = content_type.find(';');
  if (semi != std::string::npos) content_type.resize(semi);
  while (!content_type.empty() && content_type.back() == ' ') content_type.pop_back();
  for (auto& c : content_type) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (content_type == "application/xml" || content_type == "text/xml") return TraceFormat::kFcdXml;
  if (content_type == "text/csv") return TraceFormat::kCsv;
  return std::nullopt;
}

// Builds a ClusterConfig from a run request, throwing ConfigError on bad input.
ClusterConfig config_from_request(const json& body) {
  ClusterConfig cfg;
  const auto alg = body.find("algorithm");
  if (alg == body.end() || !alg->is_string()) throw ConfigError("algorithm is required");
  cfg.algorithm = parse_algorithm(alg->get<std::string>());

  const auto range = body.find("range_m");
  if (range == body.end() || !range->is_number()) throw ConfigError("range_m is required");
  cfg.range = range->get<double>();

  if (const auto params = body.find("params"); params != body.end() && !params->is_null()) {
    if (!params->is_object()) throw ConfigError("params must be an object");
    for (const auto& [key, value] : params->items()) {
      if (key == "w_v" || key == "w_d") {
        if (!value.is_number()) throw ConfigError(key + " must be a number");
        (key == "w_v" ? cfg.w_v : cfg.w_d) = value.get<double>();
      } else if (key == "t_idle" || key == "t_cont") {
        if (!value.is_number_integer()) throw ConfigError(key + " must be an integer");
        (key == "t_idle" ? cfg.t_idle : cfg.t_cont) = value.get<int>();
      } else {
        throw ConfigError("unknown parameter " + key);
      }
    }
  }
  cfg.validate();
  return cfg;
}

void only_reuse_addr(socket_t sock) {
  int yes = 1;
  setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
}

}  // namespace

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 == addr.size()) {
    throw ConfigError("address must be HOST:PORT");
  }
  std::string host = addr.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  int port = 0;
  const std::string port_text = addr.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
    throw ConfigError("invalid port in " + addr);
  }
  if (host.empty()) host = "0.0.0.0";
  return {host, port};
}

struct Service::Impl {
  ServiceOptions options;
  Store store;
  httplib::Server server;
  bool bound = false;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> queue;
  std::map<std::string, std::stop_source> active;
  bool stopping = false;
  std::vector<std::jthread> workers;

  explicit Impl(ServiceOptions opts) : options(std::move(opts)), store(options.data_dir) {
    server.set_socket_options(only_reuse_addr);
    server.set_payload_max_length(options.max_upload_bytes);
    routes();
    if (options.static_dir && std::filesystem::is_directory(*options.static_dir)) {
      server.set_mount_point("/", options.static_dir->string());
    }

    // Resubmit work a previous process accepted but never started.
    auto pending = store.list_runs();
    std::reverse(pending.begin(), pending.end());
    for (const auto& run : pending) {
      if (run.status == RunStatus::kQueued) queue.push_back(run.id);
    }
    const std::size_t n = std::max<std::size_t>(options.workers, 1);
    for (std::size_t i = 0; i < n; ++i) workers.emplace_back([this] { worker_loop(); });
  }

  void submit(const std::string& id) {
    {
      std::lock_guard lock(mu);
      queue.push_back(id);
    }
    cv.notify_one();
  }

  bool request_cancel(const std::string& id) {
    std::lock_guard lock(mu);
    const auto it = active.find(id);
    if (it == active.end()) return false;
    it->second.request_stop();
    return true;
  }

  void shutdown() {
    {
      std::lock_guard lock(mu);
      if (stopping) return;
      stopping = true;
      for (auto& [id, source] : active) source.request_stop();
    }
    cv.notify_all();
    server.stop();
    workers.clear();
  }

  void worker_loop() {
    while (true) {
      std::string id;
      std::stop_token token;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [this] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = std::move(queue.front());
        queue.pop_front();
        token = active[id].get_token();
      }
      execute(id, token);
      std::lock_guard lock(mu);
      active.erase(id);
    }
  }

  void execute(const std::string& id, std::stop_token token) {
    RunRecord run;
    try {
      run = store.update_run(id, RunStatus::kRunning);
    } catch (const std::exception&) {
      return;  // cancelled while queued
    }
    try {
      const Scenario scenario = store.load_scenario(run.scenario_id);
      ReportWriter writer = store.open_report(id);
      const RunArtifacts artifacts = run_pipeline(
          scenario, run.config, ReportFormat::kJsonl,
          [&writer](std::string_view chunk) { writer.append(chunk); },
          [this, &id](double p) { store.set_progress(id, p); }, token, options.feature_threads);
      writer.close();
      store.attach_artifacts(id, artifacts.summary_json, artifacts.graph_csv);
    } catch (const RunCancelled&) {
      bool interrupted = false;
      {
        std::lock_guard lock(mu);
        interrupted = stopping;
      }
      if (interrupted) {
        store.update_run(id, RunStatus::kFailed, std::string(Store::kInterrupted));
      } else {
        store.update_run(id, RunStatus::kCancelled);
      }
    } catch (const std::exception& e) {
      store.update_run(id, RunStatus::kFailed, e.what());
    }
  }

  // Maps store/domain exceptions onto status codes for result endpoints.
  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const UsageError& e) {
      send_error(res, 409, e.what());
    } catch (const ConfigError& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  void routes() {
    server.Post("/api/v1/scenarios", [this](const httplib::Request& req, httplib::Response& res) {
      const auto format = format_for_content_type(req.get_header_value("Content-Type"));
      if (!format) {
        return send_error(res, 415, "unsupported content type; use application/xml or text/csv");
      }
      try {
        const ScenarioRecord rec =
            store.put_scenario(req.get_param_value("name"), req.body, *format);
        send_json(res, 201, json(rec));
      } catch (const ParseError& e) {
        send_error(res, 422, e.what());
      } catch (const ScenarioRejected& e) {
        send_error(res, 422, e.what(), e.errors());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });

    server.Get("/api/v1/scenarios", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, json(store.list_scenarios())); });
    });

    server.Get(R"(/api/v1/scenarios/([0-9a-f]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   ScenarioRecord rec = store.get_scenario(req.matches[1]);
                   rec.body.clear();
                   send_json(res, 200, json(rec));
                 });
               });

    server.Get("/api/v1/algorithms", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, json(list_algorithms()));
    });

    server.Post("/api/v1/runs", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        return send_error(res, 400, std::string("malformed JSON: ") + e.what());
      }
      if (!body.is_object()) return send_error(res, 400, "run request must be a JSON object");
      const auto scenario = body.find("scenario_id");
      if (scenario == body.end() || !scenario->is_string()) {
        return send_error(res, 422, "scenario_id is required");
      }
      guarded(res, [&] {
        const ClusterConfig cfg = config_from_request(body);
        const RunRecord run = store.create_run(scenario->get<std::string>(), cfg);
        submit(run.id);
        send_json(res, 202, json(run));
      });
    });

    server.Get("/api/v1/runs", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, json(store.list_runs())); });
    });

    server.Get(R"(/api/v1/runs/([0-9a-f]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send_json(res, 200, json(store.get_run(req.matches[1]))); });
               });

    server.Delete(R"(/api/v1/runs/([0-9a-f]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] { cancel(req.matches[1], res); });
                  });

    server.Get(R"(/api/v1/runs/([0-9a-f]+)/summary)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   res.set_content(store.read_artifact(req.matches[1], "summary.json"), kJson);
                 });
               });

    server.Get(R"(/api/v1/runs/([0-9a-f]+)/graph\.csv)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] {
                   res.set_content(store.read_artifact(req.matches[1], "graph.csv"), "text/csv");
                 });
               });

    server.Get(R"(/api/v1/runs/([0-9a-f]+)/report\.jsonl)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 std::size_t offset = 0;
                 std::optional<std::size_t> limit;
                 if (req.has_param("offset")) {
                   const auto v = parse_count(req.get_param_value("offset"));
                   if (!v) return send_error(res, 400, "offset must be a non-negative integer");
                   offset = *v;
                 }
                 if (req.has_param("limit")) {
                   limit = parse_count(req.get_param_value("limit"));
                   if (!limit) return send_error(res, 400, "limit must be a non-negative integer");
                 }
                 guarded(res, [&] {
                   res.set_content(store.read_report(req.matches[1], offset, limit),
                                   "application/x-ndjson");
                 });
               });
  }

  void cancel(const std::string& id, httplib::Response& res) {
    RunRecord run = store.get_run(id);
    if (run.status == RunStatus::kQueued) {
      try {
        return send_json(res, 200, json(store.update_run(id, RunStatus::kCancelled)));
      } catch (const UsageError&) {
        run = store.get_run(id);  // a worker picked it up meanwhile
      }
    }
    if (run.status == RunStatus::kRunning && request_cancel(id)) {
      run = store.get_run(id);
      if (!is_terminal(run.status) || run.status == RunStatus::kCancelled) {
        return send_json(res, 202, json(run));
      }
    }
    run = store.get_run(id);
    send_error(res, 409, "run " + id + " already " + std::string(status_name(run.status)));
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

std::optional<int> Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) return std::nullopt;
    impl_->bound = true;
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) return std::nullopt;
  impl_->bound = true;
  return port;
}

void Service::listen() {
  if (!impl_->bound) throw UsageError("listen() before a successful bind()");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->shutdown();
}

Store& Service::store() { return impl_->store; }

}  // namespace cvanet
