#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsevo/error.hpp"
#include "tsevo/skill.hpp"

namespace tsevo::store {

enum class RecordKind { skill, capsule, audit_event, checkpoint };

std::string_view kind_name(RecordKind kind);

struct AssetRecord {
  std::uint64_t seq = 0;
  std::string run;
  RecordKind kind = RecordKind::audit_event;
  nlohmann::json payload;
};

nlohmann::json to_json(const AssetRecord& record);
AssetRecord record_from_json(const nlohmann::json& j, RecordKind kind);

// Append-only asset store for one run, laid out as
//   skills.jsonl  capsules.jsonl  events.jsonl  checkpoint.json  sessions.jsonl
// Sequence numbers are shared by all kinds and strictly increasing. Every
// line of the first three files is {seq, run, kind, payload}.
class AssetStore {
 public:
  // Starts a new run in `dir`. Throws StorageError if the directory already
  // holds run files.
  static AssetStore create(const std::filesystem::path& dir, std::string run_id);
  // Loads an existing run. Throws UnknownRun when `dir` has no run files.
  static AssetStore open(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& run_id() const { return run_; }
  std::uint64_t last_seq() const { return last_seq_; }

  // Writes one line and flushes. Returns the assigned sequence number.
  std::uint64_t append(RecordKind kind, nlohmann::json payload);
  std::uint64_t append_skill(const Skill& skill);
  std::uint64_t append_event(std::string_view event, nlohmann::json payload);

  // Replaces checkpoint.json via write-then-rename. The stored object gains
  // "seq" and "run" fields; the sequence counter advances.
  std::uint64_t write_checkpoint(nlohmann::json state);
  std::optional<nlohmann::json> checkpoint() const;

  // Drops every record with seq > `seq` from the JSONL files, used when
  // resuming from a checkpoint older than the tail of the log.
  void truncate_to(std::uint64_t seq);

  // Wall-clock session notes (start, resume, finish); never replayed.
  void log_session(nlohmann::json note);
  std::vector<nlohmann::json> sessions() const;

  const std::vector<AssetRecord>& records() const { return records_; }
  std::vector<AssetRecord> records(RecordKind kind) const;
  // Audit events of one kind ("generated", "evaluated", ...); all when empty.
  std::vector<nlohmann::json> events(std::string_view event = {}) const;

  // Latest stored version of a skill. Throws UnknownId.
  Skill skill(const std::string& id) const;
  std::vector<Skill> skills() const;
  // The skill followed by its ancestors up to the seed. Throws UnknownId.
  std::vector<Skill> lineage(const std::string& id) const;

 private:
  AssetStore(std::filesystem::path dir, std::string run) : dir_(std::move(dir)), run_(std::move(run)) {}
  void load();
  std::filesystem::path file_for(RecordKind kind) const;

  std::filesystem::path dir_;
  std::string run_;
  std::uint64_t last_seq_ = 0;
  std::vector<AssetRecord> records_;
};

// Stable identifier derived from a configuration object.
std::string derive_run_id(const nlohmann::json& config);

// Writes `text` to `path` through a temporary file and a rename.
void write_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace tsevo::store
