#pragma once

#include "dqlens/filter.hpp"
#include "dqlens/frame.hpp"
#include "dqlens/register.hpp"
#include "dqlens/scene.hpp"
#include "dqlens/workspace.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dqlens {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "dqlens-data";
  // Empty paths default to subdirectories of data_dir.
  std::filesystem::path log_dir;
  std::filesystem::path snapshot_dir;
  std::filesystem::path source_dir;
  FrameLimits limits;
  std::uint64_t upload_cap = 2ull << 30;
  std::int64_t session_ttl_ms = 24LL * 3600 * 1000;
  bool sync_log = true;
  std::size_t frames_per_session = 16;
  // Restore <data_dir>/workspace.dqlws on startup when present.
  bool restore_workspace = true;

  std::filesystem::path resolved_log_dir() const;
  std::filesystem::path resolved_snapshot_dir() const;
  std::filesystem::path resolved_source_dir() const;
  std::filesystem::path workspace_file() const;

  // Keys mirror the field names; "listen" takes "host:port".
  static ServiceConfig from_json(const nlohmann::json& j);
  // DQLENS_LISTEN, DQLENS_DATA_DIR, DQLENS_LOG_DIR, DQLENS_ITEM_BUDGET,
  // DQLENS_UPLOAD_CAP.
  void apply_env();
};

// Config file (JSON) when given, then environment overrides.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file);

struct FrameResponse {
  std::string id;    // frame digest
  std::string json;  // canonical frame text
};

struct ReplayStep {
  std::uint64_t seq = 0;
  Action action = Action::PrepFrame;
  std::string recorded;
  std::string replayed;
  bool match = false;
  std::string error;
};

struct ReplayReport {
  std::vector<ReplayStep> steps;
  std::size_t matched = 0;
  std::optional<std::uint64_t> first_mismatch;
};

nlohmann::json to_json(const ReplayReport& r);

// Session state and the logged operations over one workspace, independent
// of the transport. Every operation that changes session or workspace state
// or produces a frame writes exactly one log entry, after its result is
// computed and before the change becomes visible; if the entry cannot be
// written the operation fails with LogUnavailable and nothing changes.
// Calls within one session run in arrival order; sessions do not block each
// other.
class Workbench {
 public:
  explicit Workbench(ServiceConfig cfg, Clock clock = system_clock_ms);
  ~Workbench();
  Workbench(const Workbench&) = delete;
  Workbench& operator=(const Workbench&) = delete;

  const ServiceConfig& config() const { return cfg_; }
  Workspace& workspace() { return workspace_; }

  // Throws LogUnavailable.
  std::string create_session();
  bool has_session(const std::string& sid) const;
  // Drops sessions idle for longer than the configured ttl; returns how many.
  std::size_t expire_idle_sessions();

  // Logged operations. Each returns the response body.
  nlohmann::json load_relation(const std::string& sid, std::string_view source, const std::string& name,
                               const LoadOptions& opts);
  nlohmann::json discard_relation(const std::string& sid, const std::string& name);
  // Replaces the active selection; `relation` defaults to the scene's.
  nlohmann::json apply_filter(const std::string& sid, const FilterSpec& filter,
                              const std::optional<std::string>& relation = std::nullopt);
  // Combines the active selection (all rows when none) with the filter's rows.
  nlohmann::json compose(const std::string& sid, SetOp op, const FilterSpec& filter,
                         const std::optional<std::string>& relation = std::nullopt);
  nlohmann::json select_by_items(const std::string& sid, const std::string& frame_id,
                                 const std::vector<std::uint32_t>& item_ids);
  nlohmann::json set_scene(const std::string& sid, const SceneSpec& scene);
  FrameResponse get_frame(const std::string& sid);
  nlohmann::json refine_zoom(const std::string& sid, const ZoomWindows& window);
  // Clears the zoom windows and the active selection.
  nlohmann::json reset(const std::string& sid);
  nlohmann::json mark_items(const std::string& sid, const std::string& frame_id,
                            const std::vector<std::uint32_t>& item_ids, const std::string& label);
  nlohmann::json take_snapshot(const std::string& sid, const std::string& frame_id);
  nlohmann::json save_workspace(const std::string& sid);

  // Runs one action from its logged parameters. `payload` carries the source
  // text of load_relation; when empty the source is read from the source
  // store by digest. Returns the response body and the result digest.
  struct Outcome {
    nlohmann::json response;
    std::string digest;
    std::string frame_text;  // prep_frame only
  };
  Outcome execute(const std::string& sid, Action action, const nlohmann::json& params,
                  std::string_view payload = {});

  // Unlogged reads.
  nlohmann::json workspace_state() const;
  nlohmann::json relation_summary(const std::string& name) const;
  nlohmann::json session_state(const std::string& sid);
  nlohmann::json marks(const std::string& sid);
  std::string snapshot_text(const std::string& id) const;
  std::string session_log(const std::string& sid) const;

  // Re-executes a recorded log in a fresh session of this workbench and
  // compares result digests. With stop_on_mismatch the first mismatch
  // throws DigestMismatch carrying its seq.
  ReplayReport replay(const std::vector<LogEntry>& log, bool stop_on_mismatch = true);

 private:
  struct Session;
  struct Pending;

  std::shared_ptr<Session> session(const std::string& sid);
  Pending prepare(Session& s, Action action, const nlohmann::json& params, std::string_view payload);
  RelationPtr scene_relation(const Session& s) const;
  RelationPtr live_instance(std::uint64_t instance_id) const;
  std::string store_source(std::string_view source);
  std::string read_source(const std::string& digest) const;

  ServiceConfig cfg_;
  Clock clock_;
  Workspace workspace_;
  SnapshotStore snapshots_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  // Serializes workspace mutations (load, discard, save) across sessions.
  std::mutex catalog_writer_;
  std::uint64_t session_counter_ = 0;
};

}  // namespace dqlens
