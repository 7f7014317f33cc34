#include "dqlens/workbench.hpp"

#include "dqlens/canonical_json.hpp"
#include "dqlens/error.hpp"
#include "dqlens/hash.hpp"

#include <atomic>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace dqlens {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::BadRequest, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& p, std::string_view bytes) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::LogUnavailable, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::LogUnavailable, "cannot write " + p.string() + ": " + ec.message());
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

json params_or_empty(const json& j) { return j.is_null() ? json::object() : j; }

ZoomWindows zoom_from_json(const json& j) {
  ZoomWindows w;
  for (const auto& [attr, v] : j.items()) {
    if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::InvalidScene, "zoom window must be [lo, hi]");
    w[attr] = ValueWindow{v[0].get<double>(), v[1].get<double>()};
  }
  return w;
}

json zoom_to_json(const ZoomWindows& w) {
  json j = json::object();
  for (const auto& [attr, v] : w) j[attr] = {v.lo, v.hi};
  return j;
}

std::string new_session_id(std::uint64_t counter) {
  static thread_local std::mt19937_64 gen(std::random_device{}());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%08llx", static_cast<unsigned long long>(gen()),
                static_cast<unsigned long long>(counter & 0xffffffffULL));
  return buf;
}

}  // namespace

std::filesystem::path ServiceConfig::resolved_log_dir() const { return log_dir.empty() ? data_dir / "logs" : log_dir; }
std::filesystem::path ServiceConfig::resolved_snapshot_dir() const {
  return snapshot_dir.empty() ? data_dir / "snapshots" : snapshot_dir;
}
std::filesystem::path ServiceConfig::resolved_source_dir() const {
  return source_dir.empty() ? data_dir / "sources" : source_dir;
}
std::filesystem::path ServiceConfig::workspace_file() const { return data_dir / "workspace.dqlws"; }

namespace {

void set_listen(ServiceConfig& c, const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::InvalidOptions, "listen address must be host:port");
  c.host = listen.substr(0, colon);
  try {
    c.port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidOptions, "bad port in '" + listen + "'");
  }
}

std::uint64_t parse_u64(const char* name, const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidOptions, std::string(name) + " must be a non-negative integer");
  }
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j) {
  ServiceConfig c;
  try {
    if (j.contains("listen")) set_listen(c, j["listen"].get<std::string>());
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("log_dir")) c.log_dir = j["log_dir"].get<std::string>();
    if (j.contains("snapshot_dir")) c.snapshot_dir = j["snapshot_dir"].get<std::string>();
    if (j.contains("source_dir")) c.source_dir = j["source_dir"].get<std::string>();
    c.limits.item_budget = j.value("item_budget", c.limits.item_budget);
    c.limits.refs_per_item = j.value("refs_per_item", c.limits.refs_per_item);
    c.limits.refs_per_frame = j.value("refs_per_frame", c.limits.refs_per_frame);
    c.upload_cap = j.value("upload_cap", c.upload_cap);
    if (j.contains("session_ttl_hours")) c.session_ttl_ms = static_cast<std::int64_t>(j["session_ttl_hours"].get<double>() * 3600e3);
    c.sync_log = j.value("sync_log", c.sync_log);
    c.frames_per_session = j.value("frames_per_session", c.frames_per_session);
    c.restore_workspace = j.value("restore_workspace", c.restore_workspace);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidOptions, std::string("bad service config: ") + e.what());
  }
  if (c.limits.item_budget == 0) throw Error(ErrorCode::InvalidOptions, "item_budget must be positive");
  return c;
}

void ServiceConfig::apply_env() {
  if (const char* v = std::getenv("DQLENS_LISTEN")) set_listen(*this, v);
  if (const char* v = std::getenv("DQLENS_DATA_DIR")) data_dir = v;
  if (const char* v = std::getenv("DQLENS_LOG_DIR")) log_dir = v;
  if (const char* v = std::getenv("DQLENS_ITEM_BUDGET")) {
    limits.item_budget = parse_u64("DQLENS_ITEM_BUDGET", v);
    if (limits.item_budget == 0) throw Error(ErrorCode::InvalidOptions, "DQLENS_ITEM_BUDGET must be positive");
  }
  if (const char* v = std::getenv("DQLENS_UPLOAD_CAP")) upload_cap = parse_u64("DQLENS_UPLOAD_CAP", v);
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file) {
  ServiceConfig c;
  if (file) {
    json j;
    try {
      j = json::parse(read_file(*file));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidOptions, "config " + file->string() + ": " + e.what());
    }
    c = ServiceConfig::from_json(j);
  }
  c.apply_env();
  return c;
}

json to_json(const ReplayReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    json j = {{"seq", s.seq},
              {"action", to_string(s.action)},
              {"recorded", s.recorded},
              {"replayed", s.replayed},
              {"match", s.match}};
    if (!s.error.empty()) j["error"] = s.error;
    steps.push_back(std::move(j));
  }
  return {{"steps", std::move(steps)},
          {"matched", r.matched},
          {"total", r.steps.size()},
          {"first_mismatch", r.first_mismatch ? json(*r.first_mismatch) : json(nullptr)}};
}

struct Workbench::Session {
  std::string id;
  std::mutex mu;
  std::unique_ptr<SessionLog> log;
  std::optional<SceneSpec> scene;
  std::uint64_t scene_instance = 0;
  std::optional<Selection> selection;
  std::vector<Mark> marks;
  std::map<std::string, std::shared_ptr<const VisualFrame>> frames;
  std::deque<std::string> frame_order;
  // Frame for the current parameters; cleared by every parameter change.
  std::optional<FrameResponse> current;
  std::int64_t created_at = 0;
  std::atomic<std::int64_t> last_seen{0};
};

struct Workbench::Pending {
  json result;     // digested
  json response;   // returned; defaults to result
  std::string digest;
  std::string frame_text;
  std::function<void()> commit = [] {};
};

Workbench::Workbench(ServiceConfig cfg, Clock clock)
    : cfg_(std::move(cfg)), clock_(std::move(clock)), snapshots_(cfg_.resolved_snapshot_dir()) {
  std::error_code ec;
  std::filesystem::create_directories(cfg_.data_dir, ec);
  std::filesystem::create_directories(cfg_.resolved_source_dir(), ec);
  if (cfg_.restore_workspace && std::filesystem::exists(cfg_.workspace_file())) {
    workspace_ = Workspace::restore(read_file(cfg_.workspace_file()));
  }
}

Workbench::~Workbench() = default;

std::string Workbench::create_session() {
  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(sessions_mu_);
    s->id = new_session_id(++session_counter_);
  }
  s->log = std::make_unique<SessionLog>(cfg_.resolved_log_dir(), s->id, clock_, cfg_.sync_log);
  s->created_at = clock_();
  s->last_seen = s->created_at;
  std::lock_guard lock(sessions_mu_);
  sessions_[s->id] = s;
  return s->id;
}

bool Workbench::has_session(const std::string& sid) const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.count(sid) != 0;
}

std::size_t Workbench::expire_idle_sessions() {
  const auto now = clock_();
  std::lock_guard lock(sessions_mu_);
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second->last_seen > cfg_.session_ttl_ms) {
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::shared_ptr<Workbench::Session> Workbench::session(const std::string& sid) {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + sid + "'");
  it->second->last_seen = clock_();
  return it->second;
}

RelationPtr Workbench::live_instance(std::uint64_t instance_id) const {
  auto snap = workspace_.snapshot();
  for (const auto& [name, rel] : *snap) {
    if (rel->instance_id() == instance_id) return rel;
  }
  return nullptr;
}

RelationPtr Workbench::scene_relation(const Session& s) const {
  if (!s.scene) throw Error(ErrorCode::NoScene, "no scene has been set");
  auto rel = live_instance(s.scene_instance);
  if (!rel) {
    throw Error(ErrorCode::NoScene, "the scene's relation '" + s.scene->relation + "' is no longer loaded");
  }
  return rel;
}

std::string Workbench::store_source(std::string_view source) {
  const auto digest = sha256_hex(source);
  const auto path = cfg_.resolved_source_dir() / digest;
  if (!std::filesystem::exists(path)) {
    std::error_code ec;
    std::filesystem::create_directories(cfg_.resolved_source_dir(), ec);
    write_file_atomic(path, source);
  }
  return digest;
}

std::string Workbench::read_source(const std::string& digest) const {
  const auto path = cfg_.resolved_source_dir() / digest;
  if (digest.find('/') != std::string::npos || !std::filesystem::exists(path)) {
    throw Error(ErrorCode::UnknownRelation, "source " + digest + " is not in the source store",
                json{{"source_digest", digest}});
  }
  return read_file(path);
}

Workbench::Pending Workbench::prepare(Session& s, Action action, const json& params, std::string_view payload) {
  Pending p;
  auto find_frame = [&](const std::string& id) {
    auto it = s.frames.find(id);
    if (it == s.frames.end()) throw Error(ErrorCode::UnknownFrame, "no frame '" + id + "' in this session");
    return it->second;
  };
  auto live = [this](std::uint64_t id) { return live_instance(id); };
  auto filter_target = [&]() -> RelationPtr {
    if (workspace_.empty()) throw Error(ErrorCode::NoRelations, "no relation is loaded");
    if (auto name = optional_string(params, "relation")) return workspace_.get(*name);
    return scene_relation(s);
  };
  auto selection_on = [&](const Relation& rel) -> std::optional<Selection> {
    if (s.selection && s.selection->relation_instance == rel.instance_id()) return s.selection;
    return std::nullopt;
  };

  switch (action) {
    case Action::LoadRelation: {
      const auto name = params.at("name").get<std::string>();
      const auto opts = load_options_from_json(params.at("options"));
      if (workspace_.find(name)) throw Error(ErrorCode::DuplicateName, "relation '" + name + "' already loaded");
      std::string stored;
      if (payload.empty()) {
        stored = read_source(params.at("source_digest").get<std::string>());
        payload = stored;
      }
      auto rel = dqlens::load_relation(payload, name, opts);
      json cols = json::array();
      for (const auto& c : rel->columns()) cols.push_back({{"name", c.name()}, {"type", to_string(c.type())}});
      p.result = {{"name", name}, {"n_rows", rel->n_rows()}, {"columns", std::move(cols)}};
      p.response = p.result;
      p.response["source_digest"] = rel->source_digest();
      p.commit = [this, rel] { workspace_.add(rel); };
      break;
    }
    case Action::DiscardRelation: {
      const auto name = params.at("name").get<std::string>();
      workspace_.get(name);
      p.result = {{"discarded", name}};
      p.commit = [this, name] { workspace_.discard(name); };
      break;
    }
    case Action::ApplyFilter:
    case Action::Compose: {
      auto rel = filter_target();
      const auto filter = filter_from_json(params.at("filter"));
      auto sel = dqlens::apply_filter(*rel, filter);
      if (action == Action::Compose) {
        const auto op = set_op_from_string(params.at("op").get<std::string>());
        const auto base = selection_on(*rel);
        sel = dqlens::compose(base ? *base : Selection::all(*rel), sel, op);
      }
      p.result = sel.summary();
      p.commit = [&s, sel = std::move(sel)]() mutable {
        s.selection = std::move(sel);
        s.current.reset();
      };
      break;
    }
    case Action::SelectByItems: {
      auto frame = find_frame(params.at("frame_id").get<std::string>());
      auto sel = dqlens::select_by_items(*frame, params.at("item_ids").get<std::vector<std::uint32_t>>(), live);
      p.result = sel.summary();
      p.commit = [&s, sel = std::move(sel)]() mutable {
        s.selection = std::move(sel);
        s.current.reset();
      };
      break;
    }
    case Action::SetScene: {
      if (workspace_.empty()) throw Error(ErrorCode::NoRelations, "no relation is loaded");
      auto scene = scene_from_json(params.at("scene"));
      auto rel = workspace_.get(scene.relation);
      validate_scene(*rel, scene);
      p.result = {{"scene", to_json(scene)}};
      p.commit = [&s, scene = std::move(scene), rel]() mutable {
        s.scene = std::move(scene);
        s.scene_instance = rel->instance_id();
        if (s.selection && s.selection->relation_instance != rel->instance_id()) s.selection.reset();
        s.current.reset();
      };
      break;
    }
    case Action::PrepFrame: {
      if (workspace_.empty()) throw Error(ErrorCode::NoRelations, "no relation is loaded");
      auto rel = scene_relation(s);
      if (s.current && s.frames.count(s.current->id)) {
        p.digest = s.current->id;
        p.frame_text = s.current->json;
        p.result = {{"frame_id", p.digest}};
        break;
      }
      const auto sel = selection_on(*rel);
      auto frame = std::make_shared<const VisualFrame>(
          prep_frame(*rel, sel ? &*sel : nullptr, *s.scene, cfg_.limits));
      p.frame_text = frame_json_text(*frame);
      p.digest = sha256_hex(p.frame_text);
      p.result = {{"frame_id", p.digest}};
      p.commit = [this, &s, frame, id = p.digest, text = p.frame_text] {
        if (!s.frames.count(id)) {
          s.frames[id] = frame;
          s.frame_order.push_back(id);
          while (s.frame_order.size() > std::max<std::size_t>(cfg_.frames_per_session, 1)) {
            s.frames.erase(s.frame_order.front());
            s.frame_order.pop_front();
          }
        }
        s.current = FrameResponse{id, text};
      };
      break;
    }
    case Action::RefineZoom: {
      auto rel = scene_relation(s);
      const auto window = zoom_from_json(params.at("window"));
      auto scene = dqlens::refine_zoom(*rel, *s.scene, window);
      p.result = {{"scene", to_json(scene)}};
      p.commit = [&s, scene = std::move(scene)]() mutable {
        s.scene = std::move(scene);
        s.current.reset();
      };
      break;
    }
    case Action::Reset: {
      std::optional<SceneSpec> scene;
      if (s.scene) scene = reset_zoom(*s.scene);
      p.result = {{"scene", scene ? to_json(*scene) : json(nullptr)}};
      p.commit = [&s, scene = std::move(scene)]() mutable {
        s.scene = std::move(scene);
        s.selection.reset();
        s.current.reset();
      };
      break;
    }
    case Action::MarkItems: {
      auto frame = find_frame(params.at("frame_id").get<std::string>());
      auto sel = dqlens::select_by_items(*frame, params.at("item_ids").get<std::vector<std::uint32_t>>(), live);
      if (sel.empty()) throw Error(ErrorCode::UnknownItem, "the picked items hold no rows");
      Mark m{frame->scene.relation, std::move(sel.rows), params.value("label", std::string()), frame->scene};
      p.result = to_json(m);
      p.response = {{"mark", p.result}, {"index", s.marks.size()}};
      p.commit = [&s, m = std::move(m)]() mutable { s.marks.push_back(std::move(m)); };
      break;
    }
    case Action::TakeSnapshot: {
      const auto id = params.at("frame_id").get<std::string>();
      auto it = s.frames.find(id);
      if (it == s.frames.end() || !live_instance(it->second->relation_instance)) {
        throw Error(ErrorCode::UnknownFrame, "frame '" + id + "' is unknown or its relation was discarded");
      }
      const auto& frame = *it->second;
      const std::string text = s.current && s.current->id == id ? s.current->json : frame_json_text(frame);
      json marks = json::array();
      for (const auto& m : s.marks) marks.push_back(to_json(m));
      p.result = {{"frame_digest", id}, {"scene", to_json(frame.scene)}, {"marks", std::move(marks)}};
      auto snap = snapshots_.put(s.id, frame.scene, text, id, s.marks, clock_());
      p.response = {{"id", snap.id},
                    {"frame_digest", id},
                    {"n_marks", snap.marks.size()},
                    {"created_at", snap.created_at}};
      break;
    }
    case Action::SaveWorkspace: {
      const auto version = workspace_.version() + 1;
      const auto archive = workspace_.archive(version);
      json rels = json::array();
      for (const auto& [name, rel] : *workspace_.snapshot()) {
        rels.push_back({{"name", name}, {"n_rows", rel->n_rows()}, {"source_digest", rel->source_digest()}});
      }
      p.result = {{"relations", rels}};
      write_file_atomic(cfg_.workspace_file(), archive);
      p.response = {{"relations", std::move(rels)}, {"version", version}, {"path", cfg_.workspace_file().string()}};
      p.commit = [this, version] { workspace_.set_version(version); };
      break;
    }
  }
  if (p.response.is_null()) p.response = p.result;
  return p;
}

Workbench::Outcome Workbench::execute(const std::string& sid, Action action, const json& params,
                                      std::string_view payload) {
  auto s = session(sid);
  std::lock_guard lock(s->mu);
  std::unique_lock<std::mutex> writer(catalog_writer_, std::defer_lock);
  if (action == Action::LoadRelation || action == Action::DiscardRelation || action == Action::SaveWorkspace) {
    writer.lock();
  }
  const json args = params_or_empty(params);
  Pending p;
  try {
    p = prepare(*s, action, args, payload);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadRequest, std::string("malformed parameters: ") + e.what());
  }
  std::string digest = p.digest.empty() ? canonical_digest(p.result) : p.digest;
  s->log->append(action, args, digest);
  p.commit();
  return Outcome{std::move(p.response), std::move(digest), std::move(p.frame_text)};
}

json Workbench::load_relation(const std::string& sid, std::string_view source, const std::string& name,
                              const LoadOptions& opts) {
  opts.validate();
  session(sid);
  const auto digest = store_source(source);
  return execute(sid, Action::LoadRelation, {{"name", name}, {"options", to_json(opts)}, {"source_digest", digest}},
                 source)
      .response;
}

json Workbench::discard_relation(const std::string& sid, const std::string& name) {
  return execute(sid, Action::DiscardRelation, {{"name", name}}).response;
}

json Workbench::apply_filter(const std::string& sid, const FilterSpec& filter,
                             const std::optional<std::string>& relation) {
  return execute(sid, Action::ApplyFilter,
                 {{"relation", relation ? json(*relation) : json(nullptr)}, {"filter", to_json(filter)}})
      .response;
}

json Workbench::compose(const std::string& sid, SetOp op, const FilterSpec& filter,
                        const std::optional<std::string>& relation) {
  return execute(sid, Action::Compose,
                 {{"relation", relation ? json(*relation) : json(nullptr)},
                  {"filter", to_json(filter)},
                  {"op", to_string(op)}})
      .response;
}

json Workbench::select_by_items(const std::string& sid, const std::string& frame_id,
                                const std::vector<std::uint32_t>& item_ids) {
  return execute(sid, Action::SelectByItems, {{"frame_id", frame_id}, {"item_ids", item_ids}}).response;
}

json Workbench::set_scene(const std::string& sid, const SceneSpec& scene) {
  return execute(sid, Action::SetScene, {{"scene", to_json(scene)}}).response;
}

FrameResponse Workbench::get_frame(const std::string& sid) {
  auto out = execute(sid, Action::PrepFrame, json::object());
  return FrameResponse{std::move(out.digest), std::move(out.frame_text)};
}

json Workbench::refine_zoom(const std::string& sid, const ZoomWindows& window) {
  return execute(sid, Action::RefineZoom, {{"window", zoom_to_json(window)}}).response;
}

json Workbench::reset(const std::string& sid) { return execute(sid, Action::Reset, json::object()).response; }

json Workbench::mark_items(const std::string& sid, const std::string& frame_id,
                           const std::vector<std::uint32_t>& item_ids, const std::string& label) {
  return execute(sid, Action::MarkItems, {{"frame_id", frame_id}, {"item_ids", item_ids}, {"label", label}})
      .response;
}

json Workbench::take_snapshot(const std::string& sid, const std::string& frame_id) {
  return execute(sid, Action::TakeSnapshot, {{"frame_id", frame_id}}).response;
}

json Workbench::save_workspace(const std::string& sid) {
  return execute(sid, Action::SaveWorkspace, json::object()).response;
}

json Workbench::workspace_state() const {
  json rels = json::array();
  for (const auto& [name, rel] : *workspace_.snapshot()) {
    rels.push_back({{"name", name},
                    {"n_rows", rel->n_rows()},
                    {"n_columns", rel->n_columns()},
                    {"source_digest", rel->source_digest()}});
  }
  return {{"version", workspace_.version()},
          {"techniques_available", workspace_.techniques_available()},
          {"relations", std::move(rels)}};
}

json Workbench::relation_summary(const std::string& name) const {
  auto rel = workspace_.get(name);
  json cols = json::array();
  for (const auto& c : rel->columns()) {
    json j = {{"name", c.name()}, {"type", to_string(c.type())}, {"n_missing", c.missing_count()}};
    if (c.quantitative()) {
      const auto d = c.domain();
      j["min"] = d ? json(d->first) : json(nullptr);
      j["max"] = d ? json(d->second) : json(nullptr);
    } else {
      j["n_levels"] = c.levels().size();
      const auto shown = std::min<std::size_t>(c.levels().size(), 1000);
      j["levels"] = std::vector<std::string>(c.levels().begin(), c.levels().begin() + static_cast<std::ptrdiff_t>(shown));
    }
    cols.push_back(std::move(j));
  }
  return {{"name", rel->name()},
          {"n_rows", rel->n_rows()},
          {"source_digest", rel->source_digest()},
          {"options", to_json(rel->options())},
          {"columns", std::move(cols)}};
}

json Workbench::session_state(const std::string& sid) {
  auto s = session(sid);
  std::lock_guard lock(s->mu);
  const bool live = s->scene && live_instance(s->scene_instance);
  return {{"session_id", s->id},
          {"scene", s->scene ? to_json(*s->scene) : json(nullptr)},
          {"scene_live", live},
          {"selection", s->selection ? s->selection->summary() : json(nullptr)},
          {"n_marks", s->marks.size()},
          {"current_frame", s->current ? json(s->current->id) : json(nullptr)},
          {"created_at", s->created_at},
          {"next_seq", s->log->next_seq()}};
}

json Workbench::marks(const std::string& sid) {
  auto s = session(sid);
  std::lock_guard lock(s->mu);
  json out = json::array();
  for (const auto& m : s->marks) out.push_back(to_json(m));
  return out;
}

std::string Workbench::snapshot_text(const std::string& id) const { return snapshots_.get_text(id); }

std::string Workbench::session_log(const std::string& sid) const {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(sid);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + sid + "'");
    s = it->second;
  }
  return s->log->text();
}

ReplayReport Workbench::replay(const std::vector<LogEntry>& log, bool stop_on_mismatch) {
  ReplayReport report;
  if (log.empty()) return report;
  const auto sid = create_session();
  for (const auto& entry : log) {
    ReplayStep step;
    step.seq = entry.seq;
    step.action = entry.action;
    step.recorded = entry.result_digest;
    try {
      step.replayed = execute(sid, entry.action, entry.params).digest;
    } catch (const Error& e) {
      step.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    step.match = step.error.empty() && step.replayed == step.recorded;
    if (step.match) {
      ++report.matched;
    } else if (!report.first_mismatch) {
      report.first_mismatch = step.seq;
    }
    report.steps.push_back(step);
    if (!step.match && stop_on_mismatch) {
      throw Error(ErrorCode::DigestMismatch, "replay diverged at seq " + std::to_string(step.seq),
                  json{{"seq", step.seq},
                       {"action", to_string(step.action)},
                       {"recorded", step.recorded},
                       {"replayed", step.replayed},
                       {"error", step.error}});
    }
  }
  return report;
}

}  // namespace dqlens
