#include <pthread.h>
#include <signal.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cvanet/clustering.hpp"
#include "cvanet/error.hpp"
#include "cvanet/httpd.hpp"
#include "cvanet/pipeline.hpp"
#include "cvanet/storage.hpp"
#include "cvanet/trace.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kIoError = 2;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoFailure("error reading " + path.string());
  return std::move(ss).str();
}

void write_output(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("cannot write " + path.string());
}

cvanet::TraceFormat format_for(const fs::path& path, std::string_view bytes) {
  const auto ext = path.extension().string();
  if (ext == ".xml") return cvanet::TraceFormat::kFcdXml;
  if (ext == ".csv") return cvanet::TraceFormat::kCsv;
  return cvanet::detect_format(bytes);
}

int cmd_validate(const std::string& file) {
  const std::string body = read_input(file);
  const cvanet::Scenario s =
      cvanet::parse_scenario(body, format_for(file, body), fs::path(file).stem().string());
  const cvanet::ValidationReport r = cvanet::validate_scenario(s);
  std::cout << "timesteps: " << r.n_timesteps << "\nvehicles: " << r.n_vehicles << '\n';
  for (const auto& w : r.warnings) std::cout << "warning: " << w << '\n';
  for (const auto& e : r.errors) std::cout << "error: " << e << '\n';
  return r.runnable() ? kOk : kDomainError;
}

struct RunOptions {
  std::string scenario;
  std::string algorithm;
  double range = 0.0;
  double w_v = 0.5;
  double w_d = 0.5;
  int t_idle = 3;
  int t_cont = 3;
  std::string out;
  std::string format = "jsonl";
  unsigned threads = 1;
};

int cmd_run(const RunOptions& o) {
  cvanet::ClusterConfig cfg;
  cfg.algorithm = cvanet::parse_algorithm(o.algorithm);
  cfg.range = o.range;
  cfg.w_v = o.w_v;
  cfg.w_d = o.w_d;
  cfg.t_idle = o.t_idle;
  cfg.t_cont = o.t_cont;
  cfg.validate();
  const auto format = o.format == "csv" ? cvanet::ReportFormat::kCsv : cvanet::ReportFormat::kJsonl;

  const std::string body = read_input(o.scenario);
  const cvanet::Scenario scenario =
      cvanet::parse_scenario(body, format_for(o.scenario, body), fs::path(o.scenario).stem().string());
  const auto report = cvanet::validate_scenario(scenario);
  if (!report.runnable()) {
    for (const auto& e : report.errors) std::cerr << "error: " << e << '\n';
    return kDomainError;
  }

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());

  const fs::path report_path = dir / (format == cvanet::ReportFormat::kCsv ? "report.csv" : "report.jsonl");
  std::ofstream report_out(report_path, std::ios::binary | std::ios::trunc);
  if (!report_out) throw IoFailure("cannot write " + report_path.string());
  const auto artifacts = cvanet::run_pipeline(
      scenario, cfg, format,
      [&report_out](std::string_view chunk) {
        report_out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
      },
      {}, {}, o.threads);
  report_out.close();
  if (!report_out) throw IoFailure("cannot write " + report_path.string());

  write_output(dir / "summary.json", artifacts.summary_json);
  write_output(dir / "graph.csv", artifacts.graph_csv);
  std::cout << artifacts.summary_json;
  return kOk;
}

struct ServeOptions {
  std::string addr = "127.0.0.1:8080";
  std::string data_dir;
  std::string static_dir;
  std::size_t workers = 2;
  unsigned threads = 1;
};

int cmd_serve(const ServeOptions& o) {
  const auto [host, port] = cvanet::parse_address(o.addr);
  std::string data_dir = o.data_dir;
  if (data_dir.empty()) {
    const char* env = std::getenv("CVANETSIM_DATA_DIR");
    data_dir = env != nullptr && *env != '\0' ? env : "cvanetsim-data";
  }

  // Signals are handled synchronously by one thread; every other thread,
  // including the server's pool, inherits the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  cvanet::ServiceOptions options;
  options.data_dir = data_dir;
  options.workers = o.workers;
  options.feature_threads = o.threads;
  if (!o.static_dir.empty()) options.static_dir = fs::path(o.static_dir);
  cvanet::Service service(options);

  const auto bound = service.bind(host, port);
  if (!bound) {
    std::cerr << "cannot bind " << o.addr << '\n';
    return kDomainError;
  }
  std::cerr << "listening on " << host << ':' << *bound << " (data: " << data_dir << ")\n";

  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    signalled = true;
    service.stop();
  });
  service.listen();
  if (!signalled) kill(getpid(), SIGTERM);
  waiter.join();
  service.stop();
  std::cerr << "shut down\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven VANET clustering simulator"};
  app.require_subcommand(1);

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("file", validate_file, "FCD XML or CSV trace")->required();

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write its results");
  run_cmd->add_option("--scenario", run.scenario, "FCD XML or CSV trace")->required();
  run_cmd->add_option("--algorithm", run.algorithm, "lowest_id | highest_degree | mobility")->required();
  run_cmd->add_option("--range", run.range, "Transmission range in meters")->required();
  run_cmd->add_option("--wv", run.w_v, "Relative-speed weight (mobility)")->capture_default_str();
  run_cmd->add_option("--wd", run.w_d, "Relative-distance weight (mobility)")->capture_default_str();
  run_cmd->add_option("--t-idle", run.t_idle, "Steps a memberless CH survives")->capture_default_str();
  run_cmd->add_option("--t-cont", run.t_cont, "Steps a CH tolerates a better CH in range")->capture_default_str();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--format", run.format, "Report encoding")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();
  run_cmd->add_option("--threads", run.threads, "Feature-extraction threads")->capture_default_str();

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--addr", serve.addr, "HOST:PORT")->capture_default_str();
  serve_cmd->add_option("--data-dir", serve.data_dir, "Store directory (default $CVANETSIM_DATA_DIR)");
  serve_cmd->add_option("--static-dir", serve.static_dir, "Web UI assets served at /");
  serve_cmd->add_option("--workers", serve.workers, "Concurrent runs")->capture_default_str();
  serve_cmd->add_option("--threads", serve.threads, "Feature-extraction threads per run")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kDomainError;
  }

  try {
    if (*validate) return cmd_validate(validate_file);
    if (*run_cmd) return cmd_run(run);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const IoFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kDomainError;
}
