#include "eftos/store.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

namespace eftos {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomically(const fs::path& p, const std::string& content)
{
    auto tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec)
        throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

SimConfig load_config(const fs::path& dir)
{
    const auto path = dir / EventStore::kConfigFile;
    if (!fs::exists(path))
        throw IoError(path.string() + " not found");
    try
    {
        auto cfg = nlohmann::json::parse(read_file(path)).get<SimConfig>();
        cfg.validate();
        return cfg;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConsistencyError(path.string() + ": " + e.what());
    }
}

} // namespace

EventStore::EventStore(const SimConfig& config) : config_(config), fold_(config)
{
    config_.validate();
    publish_locked();
}

EventStore::EventStore(const SimConfig& config, fs::path dir) : config_(config), dir_(std::move(dir)), fold_(config)
{
    config_.validate();
    std::error_code ec;
    fs::create_directories(*dir_, ec);
    if (ec || !fs::is_directory(*dir_))
        throw IoError("cannot create store directory " + dir_->string());

    write_atomically(*dir_ / kConfigFile, nlohmann::json(config_).dump(2) + "\n");
    log_out_.open(*dir_ / kLogFile, std::ios::binary | std::ios::trunc);
    if (!log_out_)
        throw IoError("cannot open " + (*dir_ / kLogFile).string());
    write_snapshot_locked();
    publish_locked();
}

EventStore::EventStore(LoadTag, fs::path dir) : config_(load_config(dir)), dir_(std::move(dir)), fold_(config_)
{
    reader_ = true;
    load_lines_locked();
    publish_locked();
}

std::unique_ptr<EventStore> EventStore::open(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw IoError(dir.string() + " is not a directory");
    return std::unique_ptr<EventStore>(new EventStore(LoadTag{}, dir));
}

EventId EventStore::append(EventRecord record)
{
    std::lock_guard lock(mutex_);
    if (reader_)
        throw PreconditionError("store opened read-only");
    record.event_id = fold_.snapshot().last_event_id + 1;
    fold_.check(record);
    if (dir_)
    {
        log_out_ << to_json_line(record) << '\n';
        log_out_.flush();
        if (!log_out_)
            throw IoError("append to " + (*dir_ / kLogFile).string() + " failed");
    }
    fold_.apply(record);
    const auto id = record.event_id;
    log_.push_back(std::move(record));
    if (dir_)
        write_snapshot_locked();
    publish_locked();
    return id;
}

void EventStore::write_snapshot_locked() const
{
    write_atomically(*dir_ / kSnapshotFile, serialize(fold_.snapshot()));
}

void EventStore::publish_locked()
{
    auto snap = std::make_shared<const Snapshot>(reader_ && persisted_ ? *persisted_ : fold_.snapshot());
    std::lock_guard lock(published_mutex_);
    published_ = std::move(snap);
}

Snapshot EventStore::read_global() const
{
    std::shared_ptr<const Snapshot> snap;
    {
        std::lock_guard lock(published_mutex_);
        snap = published_;
    }
    return *snap;
}

NodeEventPage EventStore::read_node(NodeId node) const
{
    std::lock_guard lock(mutex_);
    if (!config_.in_range(node))
        throw InvalidTarget("node " + to_string(node) + " out of range (node_count " +
                            std::to_string(config_.node_count) + ")");
    NodeEventPage page{node, {}};
    for (auto it = log_.rbegin(); it != log_.rend(); ++it)
        if (it->node == node)
            page.events.push_back(*it);
    return page;
}

EventRecord EventStore::read_event(EventId id) const
{
    std::lock_guard lock(mutex_);
    // ids are dense starting at 1
    if (id == 0 || id > log_.size() || log_[id - 1].event_id != id)
        throw NotFound("event " + std::to_string(id) + " not found");
    return log_[id - 1];
}

std::vector<EventRecord> EventStore::events() const
{
    std::lock_guard lock(mutex_);
    return log_;
}

std::vector<EventRecord> EventStore::events_after(EventId after) const
{
    std::lock_guard lock(mutex_);
    auto it = std::upper_bound(log_.begin(), log_.end(), after,
                               [](EventId v, const EventRecord& e) { return v < e.event_id; });
    return {it, log_.end()};
}

EventId EventStore::last_event_id() const
{
    std::lock_guard lock(mutex_);
    return fold_.snapshot().last_event_id;
}

void EventStore::ingest_locked(EventRecord e)
{
    fold_.apply(e);
    log_.push_back(std::move(e));
}

std::size_t EventStore::load_lines_locked()
{
    const auto log_path = *dir_ / kLogFile;
    const auto snap_path = *dir_ / kSnapshotFile;

    // Snapshot before log: the writer appends the log line first, so the log
    // we read afterwards is never behind the snapshot we hold.
    if (fs::exists(snap_path))
    {
        try
        {
            persisted_ = snapshot_from_json(nlohmann::json::parse(read_file(snap_path)));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ConsistencyError(snap_path.string() + ": " + e.what());
        }
    }

    std::ifstream in(log_path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + log_path.string());
    in.seekg(static_cast<std::streamoff>(read_offset_));
    std::size_t added = 0;
    std::string line;
    std::uintmax_t offset = read_offset_;
    std::size_t line_no = log_.size();
    while (std::getline(in, line))
    {
        if (in.eof())
            break;  // no trailing newline yet: the writer is mid-append
        offset += line.size() + 1;
        ++line_no;
        if (line.empty())
            continue;
        try
        {
            ingest_locked(event_from_json(nlohmann::json::parse(line)));
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ConsistencyError(log_path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        ++added;
    }
    read_offset_ = offset;
    return added;
}

std::size_t EventStore::refresh()
{
    std::lock_guard lock(mutex_);
    if (!reader_ || !dir_)
        return 0;
    std::error_code ec;
    const auto size = fs::file_size(*dir_ / kLogFile, ec);
    if (ec)
        throw IoError("cannot stat " + (*dir_ / kLogFile).string());
    if (size < read_offset_)
    {
        config_ = load_config(*dir_);
        fold_ = SnapshotFold(config_);
        log_.clear();
        persisted_.reset();
        read_offset_ = 0;
    }
    const auto added = load_lines_locked();
    publish_locked();
    return added;
}

} // namespace eftos
