#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agenteval/ingestion.hpp"
#include "agenteval/labels.hpp"

namespace agenteval {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// File primitives
// ---------------------------------------------------------------------------

// Appends one JSON record per line; every append is fsync'd before return.
class JsonlAppender {
public:
    explicit JsonlAppender(const fs::path& path);
    ~JsonlAppender();
    JsonlAppender(const JsonlAppender&) = delete;
    JsonlAppender& operator=(const JsonlAppender&) = delete;

    void append(const Json& record);
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    int fd_ = -1;
};

// Write-to-temp, fsync, rename. Readers never observe a partial file.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);
std::vector<Json> read_jsonl(const fs::path& path);

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

// Layout under the root:
//   datasets/<id>/samples.jsonl, datasets/<id>/manifest.json
//   runs/<run_id>/...             (see orchestrator)
//   ledgers/<dataset_id>.jsonl    annotation ledgers
class Store {
public:
    explicit Store(fs::path root);

    const fs::path& root() const { return root_; }
    fs::path dataset_dir(const std::string& dataset_id) const;
    fs::path run_dir(const std::string& run_id) const;
    fs::path ledger_path(const std::string& dataset_id) const;

    // Throws ConflictError if a dataset with the same id and different
    // content exists. Identical re-ingest is a no-op.
    void put_dataset(const std::string& dataset_id, const std::vector<EvaluationSample>& samples);
    bool has_dataset(const std::string& dataset_id) const;
    std::vector<EvaluationSample> load_dataset(const std::string& dataset_id,
                                               const TaskRegistry& tasks) const;
    std::vector<std::string> dataset_ids() const;
    std::vector<std::string> run_ids() const;

    // Throws StorageError when a manifest digest does not match its file.
    static void verify_manifest(const fs::path& dir);

private:
    fs::path root_;
};

// Ids are used as path components.
void check_identifier(const std::string& id, const char* what);

// Manifest of a directory of finalized files: record counts and SHA-256.
Json build_manifest(const fs::path& dir, const std::vector<std::string>& files, Json header);

// ---------------------------------------------------------------------------
// Annotation ledger
// ---------------------------------------------------------------------------

enum class LedgerEntryKind { kLabel, kArbitration };

struct LedgerEntry {
    std::uint64_t seq = 0;
    LedgerEntryKind kind = LedgerEntryKind::kLabel;
    HumanLabel label;
    std::optional<std::string> idempotency_key;

    bool operator==(const LedgerEntry&) const = default;
};

Json to_json(const LedgerEntry& entry);
LedgerEntry ledger_entry_from_json(const Json& doc);

struct ResolvedState {
    // Exactly one final label per resolved item.
    std::map<LabelKey, HumanLabel> final_labels;
    // Two annotators disagree and nobody arbitrated yet.
    std::vector<LabelKey> conflicts;
    // Fewer than the required number of annotators so far.
    std::vector<LabelKey> incomplete;
    // Latest label of every annotator per item.
    std::map<LabelKey, std::map<std::string, HumanLabel>> latest;
};

// Pure replay of ledger entries. A later entry from the same annotator for
// the same item supersedes the earlier one; an arbitration fixes the final
// label; agreeing annotators produce a final label equal to the earliest
// of the agreeing labels.
ResolvedState resolve_ledger(const std::vector<LedgerEntry>& entries, int annotators_per_item = 2);

// Append-only human label ledger. Thread-safe; one writer per file.
class AnnotationLedger {
public:
    explicit AnnotationLedger(fs::path path, int annotators_per_item = 2);

    // Returns the sequence number. A repeated idempotency key returns the
    // original sequence number without writing (ConflictError if the label
    // differs). A third distinct annotator for an item is a ValidationError.
    std::uint64_t append_label(HumanLabel label, std::optional<std::string> idempotency_key = {});

    // ConflictError if the item was already arbitrated; ValidationError if it
    // is not currently a conflict.
    std::uint64_t append_arbitration(HumanLabel label,
                                     std::optional<std::string> idempotency_key = {});

    std::vector<LedgerEntry> entries() const;
    ResolvedState resolved() const;
    std::vector<LabelKey> conflict_set() const;
    std::vector<HumanLabel> final_labels() const;
    int annotators_per_item() const { return annotators_per_item_; }
    const fs::path& path() const { return path_; }

private:
    std::optional<std::uint64_t> replay_key(const std::optional<std::string>& key,
                                            LedgerEntryKind kind, const HumanLabel& label) const;
    std::uint64_t write(LedgerEntry entry);

    fs::path path_;
    int annotators_per_item_;
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
    std::map<std::string, std::size_t> by_key_;
    std::unique_ptr<JsonlAppender> appender_;
};

}  // namespace agenteval
