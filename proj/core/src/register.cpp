#include "dqlens/register.hpp"

#include "dqlens/canonical_json.hpp"
#include "dqlens/error.hpp"
#include "dqlens/hash.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dqlens {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::LoadRelation: return "load_relation";
    case Action::DiscardRelation: return "discard_relation";
    case Action::ApplyFilter: return "apply_filter";
    case Action::SelectByItems: return "select_by_items";
    case Action::Compose: return "compose";
    case Action::SetScene: return "set_scene";
    case Action::PrepFrame: return "prep_frame";
    case Action::RefineZoom: return "refine_zoom";
    case Action::MarkItems: return "mark_items";
    case Action::TakeSnapshot: return "take_snapshot";
    case Action::Reset: return "reset";
    case Action::SaveWorkspace: return "save_workspace";
  }
  return "prep_frame";
}

Action action_from_string(std::string_view s) {
  static constexpr Action kAll[] = {Action::LoadRelation, Action::DiscardRelation, Action::ApplyFilter,
                                    Action::SelectByItems, Action::Compose,        Action::SetScene,
                                    Action::PrepFrame,     Action::RefineZoom,     Action::MarkItems,
                                    Action::TakeSnapshot,  Action::Reset,          Action::SaveWorkspace};
  for (auto a : kAll) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorCode::BadRequest, "unknown action '" + std::string(s) + "'");
}

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

nlohmann::json to_json(const LogEntry& e) {
  return {{"seq", e.seq},
          {"timestamp", e.timestamp},
          {"session_id", e.session_id},
          {"action", to_string(e.action)},
          {"params", e.params},
          {"result_digest", e.result_digest}};
}

LogEntry log_entry_from_json(const nlohmann::json& j) {
  try {
    LogEntry e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.session_id = j.at("session_id").get<std::string>();
    e.action = action_from_string(j.at("action").get<std::string>());
    e.params = j.at("params");
    e.result_digest = j.at("result_digest").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BadRequest, std::string("malformed log entry: ") + ex.what());
  }
}

std::vector<LogEntry> parse_log(std::string_view jsonl) {
  std::vector<LogEntry> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    auto line = jsonl.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.empty()) continue;
    try {
      out.push_back(log_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::BadRequest, "log line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

SessionLog::SessionLog(std::filesystem::path dir, std::string session_id, Clock clock, bool sync)
    : dir_(std::move(dir)), session_id_(std::move(session_id)), clock_(std::move(clock)), sync_(sync) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::LogUnavailable, "cannot create log directory " + dir_.string() + ": " + ec.message());
  path_ = dir_ / (session_id_ + ".jsonl");
  write_line(path_, "");
  write_line(dir_ / "index.jsonl",
             canonical_dump({{"session_id", session_id_}, {"file", path_.filename().string()}, {"created_at", clock_()}}) +
                 "\n");
}

void SessionLog::write_line(const std::filesystem::path& file, const std::string& line) const {
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(ErrorCode::LogUnavailable, "cannot open log " + file.string() + ": " + std::strerror(errno));
  }
  std::size_t off = 0;
  while (off < line.size()) {
    const auto n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorCode::LogUnavailable, "cannot write log " + file.string() + ": " + std::strerror(err));
    }
    off += static_cast<std::size_t>(n);
  }
  if (sync_ && ::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw Error(ErrorCode::LogUnavailable, "cannot sync log " + file.string() + ": " + std::strerror(err));
  }
  if (::close(fd) != 0) throw Error(ErrorCode::LogUnavailable, "cannot close log " + file.string());
}

LogEntry SessionLog::append(Action action, nlohmann::json params, std::string result_digest) {
  std::lock_guard lock(mu_);
  LogEntry e;
  e.seq = next_seq_;
  e.timestamp = clock_();
  e.session_id = session_id_;
  e.action = action;
  e.params = std::move(params);
  e.result_digest = std::move(result_digest);
  write_line(path_, canonical_dump(to_json(e)) + "\n");
  ++next_seq_;
  return e;
}

std::uint64_t SessionLog::next_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_;
}

std::string SessionLog::text() const {
  std::lock_guard lock(mu_);
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw Error(ErrorCode::LogUnavailable, "cannot read log " + path_.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json to_json(const Mark& m) {
  return {{"relation", m.relation}, {"rows", m.rows}, {"label", m.label}, {"scene", to_json(m.scene)}};
}

Mark mark_from_json(const nlohmann::json& j) {
  Mark m;
  m.relation = j.at("relation").get<std::string>();
  m.rows = j.at("rows").get<std::vector<RowId>>();
  m.label = j.at("label").get<std::string>();
  m.scene = scene_from_json(j.at("scene"));
  return m;
}

SnapshotStore::SnapshotStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
}

Snapshot SnapshotStore::put(std::string session_id, const SceneSpec& scene, const std::string& frame_json,
                            const std::string& frame_digest, std::vector<Mark> marks, std::int64_t created_at) {
  nlohmann::json marks_json = nlohmann::json::array();
  for (const auto& m : marks) marks_json.push_back(to_json(m));
  const nlohmann::json doc = {{"session_id", session_id},
                              {"scene", to_json(scene)},
                              {"frame_json", frame_json},
                              {"frame_digest", frame_digest},
                              {"marks", std::move(marks_json)},
                              {"created_at", created_at}};
  const std::string text = canonical_dump(doc);
  Snapshot s;
  s.id = sha256_hex(text);
  s.session_id = std::move(session_id);
  s.scene = scene;
  s.frame_json = frame_json;
  s.frame_digest = frame_digest;
  s.marks = std::move(marks);
  s.created_at = created_at;

  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  const auto final_path = dir_ / (s.id + ".json");
  const auto tmp_path = dir_ / (s.id + ".json.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::LogUnavailable, "cannot write snapshot " + tmp_path.string());
  }
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) throw Error(ErrorCode::LogUnavailable, "cannot store snapshot: " + ec.message());
  return s;
}

std::string SnapshotStore::get_text(const std::string& id) const {
  if (id.size() != 64 || id.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw Error(ErrorCode::UnknownSnapshot, "no snapshot '" + id + "'");
  }
  std::ifstream in(dir_ / (id + ".json"), std::ios::binary);
  if (!in) throw Error(ErrorCode::UnknownSnapshot, "no snapshot '" + id + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Snapshot SnapshotStore::get(const std::string& id) const {
  const auto text = get_text(id);
  const auto doc = nlohmann::json::parse(text);
  Snapshot s;
  s.id = id;
  s.session_id = doc.at("session_id").get<std::string>();
  s.scene = scene_from_json(doc.at("scene"));
  s.frame_json = doc.at("frame_json").get<std::string>();
  s.frame_digest = doc.at("frame_digest").get<std::string>();
  for (const auto& m : doc.at("marks")) s.marks.push_back(mark_from_json(m));
  s.created_at = doc.at("created_at").get<std::int64_t>();
  return s;
}

}  // namespace dqlens
