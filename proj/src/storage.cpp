#include "cvanet/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>
#include <sstream>
#include <system_error>

#include "cvanet/error.hpp"
#include "cvanet/json_io.hpp"

namespace cvanet {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kReportFile = "report.jsonl";
constexpr std::string_view kPartialReportFile = "report.jsonl.part";
constexpr std::string_view kSummaryFile = "summary.json";
constexpr std::string_view kGraphFile = "graph.csv";

void write_all(int fd, std::string_view bytes, const fs::path& path) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::system_error(errno, std::generic_category(), "write " + path.string());
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Write-temp-then-rename; readers see either the old or the new content.
void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + tmp.string());
  try {
    write_all(fd, bytes, tmp);
    if (::fsync(fd) != 0) throw std::system_error(errno, std::generic_category(), "fsync " + tmp.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string format_micros(std::int64_t micros) {
  const std::time_t secs = static_cast<std::time_t>(micros / 1'000'000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(micros % 1'000'000));
  return buf;
}

bool legal_transition(RunStatus from, RunStatus to) {
  switch (from) {
    case RunStatus::kQueued: return to == RunStatus::kRunning || to == RunStatus::kCancelled;
    case RunStatus::kRunning:
      return to == RunStatus::kDone || to == RunStatus::kFailed || to == RunStatus::kCancelled;
    default: return false;
  }
}

template <typename Record>
bool newer_first(const Record& a, const Record& b) {
  if (a.created_at != b.created_at) return a.created_at > b.created_at;
  return a.id > b.id;
}

}  // namespace

ScenarioRejected::ScenarioRejected(std::vector<std::string> errors)
    : std::runtime_error(errors.empty() ? "scenario rejected" : errors.front()),
      errors_(std::move(errors)) {}

std::string_view status_name(RunStatus status) {
  switch (status) {
    case RunStatus::kQueued: return "queued";
    case RunStatus::kRunning: return "running";
    case RunStatus::kDone: return "done";
    case RunStatus::kFailed: return "failed";
    case RunStatus::kCancelled: return "cancelled";
  }
  return "failed";
}

std::optional<RunStatus> parse_status(std::string_view name) {
  for (const RunStatus s : {RunStatus::kQueued, RunStatus::kRunning, RunStatus::kDone,
                            RunStatus::kFailed, RunStatus::kCancelled}) {
    if (status_name(s) == name) return s;
  }
  return std::nullopt;
}

bool is_terminal(RunStatus status) {
  return status == RunStatus::kDone || status == RunStatus::kFailed ||
         status == RunStatus::kCancelled;
}

std::string random_token() {
  static thread_local std::mt19937_64 rng = [] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd(), rd(), rd()};
    return std::mt19937_64(seq);
  }();
  std::string out;
  out.reserve(32);
  for (int half = 0; half < 2; ++half) {
    const std::uint64_t v = rng();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    out += buf;
  }
  return out;
}

ReportWriter::ReportWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw std::system_error(errno, std::generic_category(), "open " + path.string());
}

void ReportWriter::append(std::string_view bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw std::runtime_error("report write failed");
}

void ReportWriter::close() {
  if (out_.is_open()) out_.close();
}

Store::Store(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "scenarios");
  fs::create_directories(root_ / "runs");
  recover();
}

fs::path Store::run_dir(const std::string& id) const { return root_ / "runs" / id; }
fs::path Store::scenario_dir(const std::string& id) const { return root_ / "scenarios" / id; }

std::string Store::next_timestamp() {
  const auto now = std::chrono::duration_cast<std::chrono::microseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  last_micros_ = std::max<std::int64_t>(now, last_micros_ + 1);
  return format_micros(last_micros_);
}

void Store::recover() {
  for (const auto& entry : fs::directory_iterator(root_ / "scenarios")) {
    const fs::path meta = entry.path() / "meta.json";
    if (!fs::exists(meta) || !fs::exists(entry.path() / "body")) continue;
    try {
      ScenarioRecord rec = nlohmann::json::parse(read_file(meta)).get<ScenarioRecord>();
      scenarios_.emplace(rec.id, std::move(rec));
    } catch (const std::exception&) {
      // Unreadable metadata is skipped; the directory is left for inspection.
    }
  }

  for (const auto& entry : fs::directory_iterator(root_ / "runs")) {
    const fs::path meta = entry.path() / "run.json";
    if (!fs::exists(meta)) continue;
    RunRecord run;
    try {
      run = nlohmann::json::parse(read_file(meta)).get<RunRecord>();
    } catch (const std::exception&) {
      continue;
    }
    std::error_code ec;
    fs::remove(meta.string() + ".tmp", ec);
    if (run.status == RunStatus::kRunning) {
      run.status = RunStatus::kFailed;
      run.error = std::string(kInterrupted);
      persist_run(run);
    }
    if (run.status != RunStatus::kDone) discard_artifacts(run.id);
    runs_.emplace(run.id, std::move(run));
  }
}

void Store::persist_run(const RunRecord& run) const {
  write_file_atomic(run_dir(run.id) / "run.json", nlohmann::json(run).dump(2) + "\n");
}

void Store::discard_artifacts(const std::string& id) const {
  std::error_code ec;
  for (const auto name : {kReportFile, kPartialReportFile, kSummaryFile, kGraphFile}) {
    fs::remove(run_dir(id) / name, ec);
  }
}

ScenarioRecord Store::put_scenario(std::string name, std::string body, TraceFormat format) {
  const Scenario scenario = parse_scenario(body, format, name);
  ValidationReport report = validate_scenario(scenario);
  if (!report.runnable()) throw ScenarioRejected(report.errors);

  ScenarioRecord rec;
  rec.name = std::move(name);
  rec.format = format;
  rec.validation = std::move(report);
  {
    std::lock_guard lock(mutex_);
    rec.id = random_token();
    rec.created_at = next_timestamp();
  }
  const fs::path dir = scenario_dir(rec.id);
  fs::create_directories(dir);
  write_file_atomic(dir / "body", body);
  write_file_atomic(dir / "meta.json", nlohmann::json(rec).dump(2) + "\n");

  std::lock_guard lock(mutex_);
  scenarios_.emplace(rec.id, rec);
  rec.body = std::move(body);
  return rec;
}

ScenarioRecord Store::get_scenario(const std::string& id) const {
  ScenarioRecord rec;
  {
    std::lock_guard lock(mutex_);
    const auto it = scenarios_.find(id);
    if (it == scenarios_.end()) throw NotFound("unknown scenario " + id);
    rec = it->second;
  }
  rec.body = read_file(scenario_dir(id) / "body");
  return rec;
}

std::vector<ScenarioRecord> Store::list_scenarios() const {
  std::vector<ScenarioRecord> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, rec] : scenarios_) out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), newer_first<ScenarioRecord>);
  return out;
}

Scenario Store::load_scenario(const std::string& id) const {
  const ScenarioRecord rec = get_scenario(id);
  return parse_scenario(rec.body, rec.format, rec.name);
}

RunRecord Store::create_run(const std::string& scenario_id, const ClusterConfig& config) {
  config.validate();
  std::lock_guard lock(mutex_);
  if (!scenarios_.contains(scenario_id)) throw NotFound("unknown scenario " + scenario_id);
  RunRecord run;
  run.id = random_token();
  run.scenario_id = scenario_id;
  run.config = config;
  run.created_at = next_timestamp();
  fs::create_directories(run_dir(run.id));
  persist_run(run);
  runs_.emplace(run.id, run);
  return run;
}

const RunRecord& Store::require_run(const std::string& id) const {
  const auto it = runs_.find(id);
  if (it == runs_.end()) throw NotFound("unknown run " + id);
  return it->second;
}

RunRecord Store::update_run(const std::string& id, RunStatus status, std::string error) {
  std::lock_guard lock(mutex_);
  RunRecord run = require_run(id);
  if (status == RunStatus::kDone || !legal_transition(run.status, status)) {
    throw UsageError("illegal run transition " + std::string(status_name(run.status)) + " -> " +
                     std::string(status_name(status)));
  }
  run.status = status;
  run.error = std::move(error);
  if (status != RunStatus::kRunning) discard_artifacts(id);
  persist_run(run);
  runs_[id] = run;
  return run;
}

void Store::set_progress(const std::string& id, double progress) {
  std::lock_guard lock(mutex_);
  const auto it = runs_.find(id);
  if (it == runs_.end()) throw NotFound("unknown run " + id);
  RunRecord& run = it->second;
  if (run.status != RunStatus::kRunning) throw UsageError("progress on a run that is not running");
  run.progress = std::clamp(std::max(progress, run.progress), 0.0, 1.0);
  const int tenths = static_cast<int>(run.progress * 10.0);
  int& persisted = persisted_tenths_[id];
  if (tenths > persisted) {
    persisted = tenths;
    persist_run(run);
  }
}

RunRecord Store::get_run(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return require_run(id);
}

std::vector<RunRecord> Store::list_runs() const {
  std::vector<RunRecord> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, run] : runs_) out.push_back(run);
  }
  std::sort(out.begin(), out.end(), newer_first<RunRecord>);
  return out;
}

ReportWriter Store::open_report(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (require_run(id).status != RunStatus::kRunning) throw UsageError("run " + id + " is not running");
  return ReportWriter(run_dir(id) / kPartialReportFile);
}

RunRecord Store::attach_artifacts(const std::string& id, std::string_view summary_json,
                                  std::string_view graph_csv) {
  std::lock_guard lock(mutex_);
  RunRecord run = require_run(id);
  if (run.status != RunStatus::kRunning) {
    throw UsageError("artifacts can only be attached to a running run");
  }
  const fs::path dir = run_dir(id);
  write_file_atomic(dir / kSummaryFile, summary_json);
  write_file_atomic(dir / kGraphFile, graph_csv);
  if (!fs::exists(dir / kPartialReportFile)) write_file_atomic(dir / kPartialReportFile, "");
  fs::rename(dir / kPartialReportFile, dir / kReportFile);
  run.status = RunStatus::kDone;
  run.progress = 1.0;
  run.error.clear();
  persist_run(run);
  runs_[id] = run;
  persisted_tenths_.erase(id);
  return run;
}

void Store::require_done(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const RunRecord& run = require_run(id);
  if (run.status != RunStatus::kDone) {
    throw UsageError("run " + id + " is " + std::string(status_name(run.status)) + ", not done");
  }
}

std::string Store::read_artifact(const std::string& id, std::string_view name) const {
  if (name != kSummaryFile && name != kGraphFile && name != kReportFile) {
    throw NotFound("unknown artifact " + std::string(name));
  }
  require_done(id);
  return read_file(run_dir(id) / name);
}

std::string Store::read_report(const std::string& id, std::size_t offset,
                               std::optional<std::size_t> limit) const {
  require_done(id);
  if (offset == 0 && !limit) return read_file(run_dir(id) / kReportFile);

  std::ifstream in(run_dir(id) / kReportFile, std::ios::binary);
  if (!in) throw NotFound("report missing for run " + id);
  std::string out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (limit && index >= offset + *limit) break;
    if (index >= offset) {
      out += line;
      out.push_back('\n');
    }
    ++index;
  }
  return out;
}

}  // namespace cvanet
