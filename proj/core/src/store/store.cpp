#include "tsevo/store/store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tsevo/error.hpp"

namespace tsevo::store {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr RecordKind kLogged[] = {RecordKind::skill, RecordKind::capsule, RecordKind::audit_event};

std::vector<json> read_lines(const fs::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      break;  // a torn final line from an interrupted write
    }
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view kind_name(RecordKind kind) {
  switch (kind) {
    case RecordKind::skill: return "skill";
    case RecordKind::capsule: return "capsule";
    case RecordKind::audit_event: return "audit_event";
    case RecordKind::checkpoint: return "checkpoint";
  }
  return "?";
}

json to_json(const AssetRecord& record) {
  return json{{"seq", record.seq}, {"run", record.run}, {"kind", kind_name(record.kind)}, {"payload", record.payload}};
}

AssetRecord record_from_json(const json& j, RecordKind kind) {
  AssetRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.run = j.at("run").get<std::string>();
  r.kind = kind;
  r.payload = j.at("payload");
  return r;
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw StorageError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StorageError("cannot replace " + path.string() + ": " + ec.message());
}

std::string derive_run_id(const json& config) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream ss;
  ss << "run-" << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << h;
  return ss.str();
}

fs::path AssetStore::file_for(RecordKind kind) const {
  switch (kind) {
    case RecordKind::skill: return dir_ / "skills.jsonl";
    case RecordKind::capsule: return dir_ / "capsules.jsonl";
    case RecordKind::audit_event: return dir_ / "events.jsonl";
    case RecordKind::checkpoint: return dir_ / "checkpoint.json";
  }
  return dir_ / "unknown";
}

bool AssetStore::exists(const fs::path& dir) {
  return fs::exists(dir / "events.jsonl") || fs::exists(dir / "checkpoint.json") || fs::exists(dir / "skills.jsonl");
}

AssetStore AssetStore::create(const fs::path& dir, std::string run_id) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());
  if (exists(dir)) throw StorageError(dir.string() + " already holds a run");
  AssetStore s(dir, std::move(run_id));
  for (auto kind : kLogged) {
    std::ofstream touch(s.file_for(kind), std::ios::app);
    if (!touch) throw StorageError("cannot create " + s.file_for(kind).string());
  }
  return s;
}

AssetStore AssetStore::open(const fs::path& dir) {
  if (!exists(dir)) throw UnknownRun("no run in " + dir.string());
  AssetStore s(dir, "");
  s.load();
  return s;
}

void AssetStore::load() {
  records_.clear();
  last_seq_ = 0;
  for (auto kind : kLogged) {
    for (const auto& line : read_lines(file_for(kind))) {
      records_.push_back(record_from_json(line, kind));
      if (run_.empty()) run_ = records_.back().run;
    }
  }
  std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
  if (!records_.empty()) last_seq_ = records_.back().seq;
  if (auto cp = checkpoint()) {
    last_seq_ = std::max(last_seq_, cp->at("seq").get<std::uint64_t>());
    if (run_.empty()) run_ = cp->at("run").get<std::string>();
  }
}

std::uint64_t AssetStore::append(RecordKind kind, json payload) {
  if (kind == RecordKind::checkpoint) return write_checkpoint(std::move(payload));
  AssetRecord r{last_seq_ + 1, run_, kind, std::move(payload)};
  std::ofstream out(file_for(kind), std::ios::app | std::ios::binary);
  if (!out) throw StorageError("cannot append to " + file_for(kind).string());
  out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw StorageError("append failed for " + file_for(kind).string());
  last_seq_ = r.seq;
  records_.push_back(std::move(r));
  return last_seq_;
}

std::uint64_t AssetStore::append_skill(const Skill& skill) { return append(RecordKind::skill, json(skill)); }

std::uint64_t AssetStore::append_event(std::string_view event, json payload) {
  return append(RecordKind::audit_event, json{{"event", event}, {"data", std::move(payload)}});
}

std::uint64_t AssetStore::write_checkpoint(json state) {
  const std::uint64_t seq = last_seq_ + 1;
  state["seq"] = seq;
  state["run"] = run_;
  write_atomically(file_for(RecordKind::checkpoint), state.dump(2) + "\n");
  last_seq_ = seq;
  return seq;
}

std::optional<json> AssetStore::checkpoint() const {
  const auto path = file_for(RecordKind::checkpoint);
  if (!fs::exists(path)) return std::nullopt;
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw StorageError("corrupt checkpoint: " + std::string(e.what()));
  }
}

void AssetStore::truncate_to(std::uint64_t seq) {
  for (auto kind : kLogged) {
    std::string text;
    for (const auto& r : records_) {
      if (r.kind == kind && r.seq <= seq) text += to_json(r).dump() + "\n";
    }
    write_atomically(file_for(kind), text);
  }
  std::erase_if(records_, [&](const AssetRecord& r) { return r.seq > seq; });
  last_seq_ = seq;
}

void AssetStore::log_session(json note) {
  std::ofstream out(dir_ / "sessions.jsonl", std::ios::app | std::ios::binary);
  if (!out) throw StorageError("cannot append to sessions.jsonl");
  out << note.dump() << '\n';
}

std::vector<json> AssetStore::sessions() const { return read_lines(dir_ / "sessions.jsonl"); }

std::vector<AssetRecord> AssetStore::records(RecordKind kind) const {
  std::vector<AssetRecord> out;
  for (const auto& r : records_) {
    if (r.kind == kind) out.push_back(r);
  }
  return out;
}

std::vector<json> AssetStore::events(std::string_view event) const {
  std::vector<json> out;
  for (const auto& r : records_) {
    if (r.kind != RecordKind::audit_event) continue;
    if (event.empty() || r.payload.at("event").get<std::string>() == event) out.push_back(r.payload);
  }
  return out;
}

Skill AssetStore::skill(const std::string& id) const {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->kind == RecordKind::skill && it->payload.at("id").get<std::string>() == id) return it->payload.get<Skill>();
  }
  throw UnknownId("unknown skill id '" + id + "'");
}

std::vector<Skill> AssetStore::skills() const {
  std::map<std::string, std::size_t> index;
  std::vector<Skill> out;
  for (const auto& r : records_) {
    if (r.kind != RecordKind::skill) continue;
    auto s = r.payload.get<Skill>();
    if (auto it = index.find(s.id); it != index.end()) {
      out[it->second] = std::move(s);
    } else {
      index.emplace(s.id, out.size());
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Skill> AssetStore::lineage(const std::string& id) const {
  std::vector<Skill> chain;
  std::set<std::string> seen;
  std::optional<std::string> cur = id;
  while (cur) {
    if (!seen.insert(*cur).second) throw StorageError("lineage cycle at '" + *cur + "'");
    chain.push_back(skill(*cur));
    cur = chain.back().parent_id;
  }
  return chain;
}

}  // namespace tsevo::store
