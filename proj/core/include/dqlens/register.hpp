#pragma once

#include "dqlens/scene.hpp"
#include "dqlens/selection.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace dqlens {

enum class Action {
  LoadRelation,
  DiscardRelation,
  ApplyFilter,
  SelectByItems,
  Compose,
  SetScene,
  PrepFrame,
  RefineZoom,
  MarkItems,
  TakeSnapshot,
  Reset,
  SaveWorkspace,
};

std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

// UTC milliseconds.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

struct LogEntry {
  std::uint64_t seq = 0;
  std::int64_t timestamp = 0;
  std::string session_id;
  Action action = Action::PrepFrame;
  nlohmann::json params;
  std::string result_digest;
};

nlohmann::json to_json(const LogEntry& e);
LogEntry log_entry_from_json(const nlohmann::json& j);
// One entry per non-empty line. Throws BadRequest on malformed lines.
std::vector<LogEntry> parse_log(std::string_view jsonl);

// Append-only JSON-lines log of one session, at <dir>/<session_id>.jsonl,
// registered in <dir>/index.jsonl. Each append is written and flushed to
// stable storage before it returns.
class SessionLog {
 public:
  // Throws LogUnavailable when the log cannot be created.
  SessionLog(std::filesystem::path dir, std::string session_id, Clock clock = system_clock_ms, bool sync = true);

  // Throws LogUnavailable; the sequence number is not consumed on failure.
  LogEntry append(Action action, nlohmann::json params, std::string result_digest);

  const std::string& session_id() const { return session_id_; }
  const std::filesystem::path& path() const { return path_; }
  std::uint64_t next_seq() const;
  // Raw JSON-lines content.
  std::string text() const;

 private:
  void write_line(const std::filesystem::path& file, const std::string& line) const;

  std::filesystem::path dir_;
  std::filesystem::path path_;
  std::string session_id_;
  Clock clock_;
  bool sync_;
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 1;
};

// Rows flagged by the appraiser as suspected defects. Session scoped; never
// written back to the relation.
struct Mark {
  std::string relation;
  std::vector<RowId> rows;
  std::string label;
  SceneSpec scene;
};

nlohmann::json to_json(const Mark& m);
Mark mark_from_json(const nlohmann::json& j);

struct Snapshot {
  std::string id;
  std::string session_id;
  SceneSpec scene;
  std::string frame_json;  // canonical frame text, byte-identical to what was served
  std::string frame_digest;
  std::vector<Mark> marks;
  std::int64_t created_at = 0;
};

// Content-addressed snapshot files: <dir>/<sha256>.json.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::filesystem::path dir);

  // Throws LogUnavailable when the file cannot be written.
  Snapshot put(std::string session_id, const SceneSpec& scene, const std::string& frame_json,
               const std::string& frame_digest, std::vector<Mark> marks, std::int64_t created_at);
  // Throws UnknownSnapshot.
  Snapshot get(const std::string& id) const;
  std::string get_text(const std::string& id) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace dqlens
