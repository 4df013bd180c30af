#include "agenteval/persistence.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"
#include "json_fields.hpp"

namespace agenteval {

namespace {

[[noreturn]] void throw_io(const std::string& what, const fs::path& path) {
    throw StorageError(what + " '" + path.string() + "': " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& path) {
    while (!data.empty()) {
        ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_io("write failed for", path);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void sync_directory(const fs::path& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

std::size_t count_lines(std::string_view content) {
    return static_cast<std::size_t>(std::count(content.begin(), content.end(), '\n'));
}

}  // namespace

JsonlAppender::JsonlAppender(const fs::path& path) : path_(path) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw_io("cannot open", path);
}

JsonlAppender::~JsonlAppender() {
    if (fd_ >= 0) ::close(fd_);
}

void JsonlAppender::append(const Json& record) {
    auto line = to_line(record);
    line.push_back('\n');
    write_all(fd_, line, path_);
    if (::fsync(fd_) != 0) throw_io("fsync failed for", path_);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    auto tmp = path;
    tmp += ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw_io("cannot create", tmp);
    try {
        write_all(fd, content, tmp);
        if (::fsync(fd) != 0) throw_io("fsync failed for", tmp);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) throw_io("cannot rename onto", path);
    sync_directory(path.parent_path());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<Json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open '" + path.string() + "'");
    std::vector<Json> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json doc = Json::parse(line, nullptr, false);
        if (doc.is_discarded()) {
            throw StorageError(path.string() + ": line " + std::to_string(line_number) +
                               " is not valid JSON");
        }
        records.push_back(std::move(doc));
    }
    return records;
}

// ---------------------------------------------------------------------------

void check_identifier(const std::string& id, const char* what) {
    const bool ok = !id.empty() && id.size() <= 128 && id != "." && id != ".." &&
                    std::all_of(id.begin(), id.end(), [](unsigned char c) {
                        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                    });
    if (!ok) {
        throw ValidationError(std::string(what) + " '" + id +
                              "' must be 1-128 characters of [A-Za-z0-9._-]");
    }
}

Json build_manifest(const fs::path& dir, const std::vector<std::string>& files, Json header) {
    Json entries = Json::object();
    for (const auto& name : files) {
        auto content = read_file(dir / name);
        // A plain JSON document is one record.
        const auto records = fs::path(name).extension() == ".jsonl" ? count_lines(content) : std::size_t{1};
        entries[name] = {{"records", records}, {"sha256", sha256_hex(content)}};
    }
    header["format_version"] = kFormatVersion;
    header["files"] = std::move(entries);
    return header;
}

Store::Store(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    for (const char* sub : {"datasets", "runs", "ledgers"}) {
        fs::create_directories(root_ / sub, ec);
        if (ec) throw StorageError("cannot create store directory '" + (root_ / sub).string() + "'");
    }
}

fs::path Store::dataset_dir(const std::string& dataset_id) const {
    check_identifier(dataset_id, "dataset id");
    return root_ / "datasets" / dataset_id;
}

fs::path Store::run_dir(const std::string& run_id) const {
    check_identifier(run_id, "run id");
    return root_ / "runs" / run_id;
}

fs::path Store::ledger_path(const std::string& dataset_id) const {
    check_identifier(dataset_id, "dataset id");
    return root_ / "ledgers" / (dataset_id + ".jsonl");
}

void Store::put_dataset(const std::string& dataset_id, const std::vector<EvaluationSample>& samples) {
    auto dir = dataset_dir(dataset_id);
    std::ostringstream out;
    write_samples(out, samples);
    const auto content = out.str();
    if (fs::exists(dir / "manifest.json")) {
        if (read_file(dir / "samples.jsonl") == content) return;
        throw ConflictError("dataset '" + dataset_id + "' already exists with different content");
    }
    write_file_atomic(dir / "samples.jsonl", content);
    auto manifest = build_manifest(dir, {"samples.jsonl"}, {{"dataset_id", dataset_id}});
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

bool Store::has_dataset(const std::string& dataset_id) const {
    return fs::exists(dataset_dir(dataset_id) / "manifest.json");
}

std::vector<EvaluationSample> Store::load_dataset(const std::string& dataset_id,
                                                  const TaskRegistry& tasks) const {
    if (!has_dataset(dataset_id)) throw NotFoundError("unknown dataset '" + dataset_id + "'");
    auto dir = dataset_dir(dataset_id);
    verify_manifest(dir);
    return load_samples_file((dir / "samples.jsonl").string(), ParseMode::kLenient, tasks).samples;
}

namespace {

std::vector<std::string> list_with_manifest(const fs::path& dir) {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

std::vector<std::string> Store::dataset_ids() const { return list_with_manifest(root_ / "datasets"); }
std::vector<std::string> Store::run_ids() const { return list_with_manifest(root_ / "runs"); }

void Store::verify_manifest(const fs::path& dir) {
    auto manifest = Json::parse(read_file(dir / "manifest.json"), nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("files") || !manifest["files"].is_object()) {
        throw StorageError("malformed manifest in '" + dir.string() + "'");
    }
    for (const auto& [name, info] : manifest["files"].items()) {
        auto content = read_file(dir / name);
        if (sha256_hex(content) != info.value("sha256", "")) {
            throw StorageError("digest mismatch for '" + (dir / name).string() + "'");
        }
    }
}

// ---------------------------------------------------------------------------

Json to_json(const LedgerEntry& entry) {
    Json record = {{"format_version", kFormatVersion},
                   {"seq", entry.seq},
                   {"kind", entry.kind == LedgerEntryKind::kLabel ? "label" : "arbitration"},
                   {"label", to_json(entry.label)}};
    if (entry.idempotency_key) record["idempotency_key"] = *entry.idempotency_key;
    return record;
}

LedgerEntry ledger_entry_from_json(const Json& doc) {
    detail::FieldReader r(doc, "ledger entry");
    r.check_version();
    LedgerEntry entry;
    auto seq = r.integer("seq");
    if (seq < 1) throw ValidationError("ledger entry: seq must be positive");
    entry.seq = static_cast<std::uint64_t>(seq);
    auto kind = r.string("kind");
    if (kind == "label") {
        entry.kind = LedgerEntryKind::kLabel;
    } else if (kind == "arbitration") {
        entry.kind = LedgerEntryKind::kArbitration;
    } else {
        throw ValidationError("ledger entry: unknown kind '" + kind + "'");
    }
    entry.label = human_label_from_json(r.required("label"));
    if (const Json* key = r.optional("idempotency_key")) {
        if (!key->is_string()) r.fail("idempotency_key", "a string");
        entry.idempotency_key = key->get<std::string>();
    }
    r.leftovers(ParseMode::kStrict);
    return entry;
}

ResolvedState resolve_ledger(const std::vector<LedgerEntry>& entries, int annotators_per_item) {
    struct Latest {
        std::uint64_t seq;
        HumanLabel label;
    };
    std::map<LabelKey, std::map<std::string, Latest>> latest;
    std::map<LabelKey, HumanLabel> arbitrations;
    for (const auto& entry : entries) {
        auto key = entry.label.key();
        if (entry.kind == LedgerEntryKind::kArbitration) {
            arbitrations.try_emplace(key, entry.label);
            latest.try_emplace(key);
        } else {
            latest[key].insert_or_assign(entry.label.annotator_id, Latest{entry.seq, entry.label});
        }
    }

    ResolvedState state;
    for (const auto& [key, by_annotator] : latest) {
        auto& view = state.latest[key];
        for (const auto& [annotator, l] : by_annotator) {
            view.emplace(annotator, l.label).first->second.is_final = false;
        }
        if (auto arb = arbitrations.find(key); arb != arbitrations.end()) {
            HumanLabel final_label = arb->second;
            final_label.is_final = true;
            state.final_labels.emplace(key, std::move(final_label));
            continue;
        }
        if (static_cast<int>(by_annotator.size()) < annotators_per_item) {
            state.incomplete.push_back(key);
            continue;
        }
        const Latest* earliest = nullptr;
        bool agree = true;
        for (const auto& [annotator, l] : by_annotator) {
            if (earliest && !same_judgement(earliest->label.payload, l.label.payload)) agree = false;
            if (!earliest || l.seq < earliest->seq) earliest = &l;
        }
        if (!agree) {
            state.conflicts.push_back(key);
            continue;
        }
        HumanLabel final_label = earliest->label;
        final_label.is_final = true;
        state.final_labels.emplace(key, std::move(final_label));
    }
    return state;
}

AnnotationLedger::AnnotationLedger(fs::path path, int annotators_per_item)
    : path_(std::move(path)), annotators_per_item_(annotators_per_item) {
    if (annotators_per_item_ < 1) throw ValidationError("annotators_per_item must be positive");
    if (fs::exists(path_)) {
        std::uint64_t last = 0;
        for (const auto& doc : read_jsonl(path_)) {
            auto entry = ledger_entry_from_json(doc);
            if (entry.seq <= last) throw StorageError("ledger '" + path_.string() + "' has non-monotone seq");
            last = entry.seq;
            if (entry.idempotency_key) by_key_.emplace(*entry.idempotency_key, entries_.size());
            entries_.push_back(std::move(entry));
        }
    }
    appender_ = std::make_unique<JsonlAppender>(path_);
}

std::optional<std::uint64_t> AnnotationLedger::replay_key(const std::optional<std::string>& key,
                                                          LedgerEntryKind kind,
                                                          const HumanLabel& label) const {
    if (!key) return std::nullopt;
    auto it = by_key_.find(*key);
    if (it == by_key_.end()) return std::nullopt;
    const auto& previous = entries_[it->second];
    if (previous.kind != kind || previous.label != label) {
        throw ConflictError("idempotency key '" + *key + "' was already used for a different request");
    }
    return previous.seq;
}

std::uint64_t AnnotationLedger::write(LedgerEntry entry) {
    entry.seq = entries_.empty() ? 1 : entries_.back().seq + 1;
    appender_->append(to_json(entry));
    if (entry.idempotency_key) by_key_.emplace(*entry.idempotency_key, entries_.size());
    entries_.push_back(std::move(entry));
    return entries_.back().seq;
}

std::uint64_t AnnotationLedger::append_label(HumanLabel label,
                                             std::optional<std::string> idempotency_key) {
    check_label_shape(label);
    label.is_final = false;
    std::lock_guard lock(mutex_);
    if (auto seq = replay_key(idempotency_key, LedgerEntryKind::kLabel, label)) return *seq;

    const auto key = label.key();
    std::set<std::string> annotators;
    for (const auto& e : entries_) {
        if (e.kind == LedgerEntryKind::kLabel && e.label.key() == key) annotators.insert(e.label.annotator_id);
    }
    if (!annotators.contains(label.annotator_id) &&
        static_cast<int>(annotators.size()) >= annotators_per_item_) {
        throw ValidationError("item " + to_string(key) + " already has " +
                              std::to_string(annotators_per_item_) + " annotators");
    }
    return write({0, LedgerEntryKind::kLabel, std::move(label), std::move(idempotency_key)});
}

std::uint64_t AnnotationLedger::append_arbitration(HumanLabel label,
                                                   std::optional<std::string> idempotency_key) {
    check_label_shape(label);
    label.is_final = true;
    std::lock_guard lock(mutex_);
    if (auto seq = replay_key(idempotency_key, LedgerEntryKind::kArbitration, label)) return *seq;

    const auto key = label.key();
    for (const auto& e : entries_) {
        if (e.kind == LedgerEntryKind::kArbitration && e.label.key() == key) {
            throw ConflictError("item " + to_string(key) + " was already arbitrated");
        }
    }
    auto state = resolve_ledger(entries_, annotators_per_item_);
    if (!std::binary_search(state.conflicts.begin(), state.conflicts.end(), key)) {
        throw ValidationError("item " + to_string(key) + " is not in conflict");
    }
    return write({0, LedgerEntryKind::kArbitration, std::move(label), std::move(idempotency_key)});
}

std::vector<LedgerEntry> AnnotationLedger::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

ResolvedState AnnotationLedger::resolved() const {
    std::lock_guard lock(mutex_);
    return resolve_ledger(entries_, annotators_per_item_);
}

std::vector<LabelKey> AnnotationLedger::conflict_set() const { return resolved().conflicts; }

std::vector<HumanLabel> AnnotationLedger::final_labels() const {
    auto state = resolved();
    std::vector<HumanLabel> out;
    out.reserve(state.final_labels.size());
    for (auto& [key, label] : state.final_labels) out.push_back(std::move(label));
    return out;
}

}  // namespace agenteval
