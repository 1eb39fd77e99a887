#pragma once

#include "eftos/config.hpp"
#include "eftos/event.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <mutex>
#include <vector>

namespace eftos {

/// The snapshot database: an append-only event log plus the current snapshot.
///
/// On disk a store directory holds
///   config.json    the run's SimConfig (the fold's starting point)
///   events.jsonl   one EventRecord per line, append-only
///   snapshot.json  fold of the log, replaced atomically after every append
///
/// One writer, many readers. Reads never observe a half-applied append;
/// read_global() returns the last published snapshot without waiting. A store opened with open() is a reader of files
/// written by another process and catches up through refresh().
class EventStore final : public EventSink
{
public:
    static constexpr const char* kConfigFile = "config.json";
    static constexpr const char* kLogFile = "events.jsonl";
    static constexpr const char* kSnapshotFile = "snapshot.json";

    /// Initializes (or truncates) `dir` for a fresh run.
    EventStore(const SimConfig& config, std::filesystem::path dir);
    /// Memory-only store; same semantics, nothing persisted.
    explicit EventStore(const SimConfig& config);

    /// Reconstructs a store from files alone. Throws IoError / ConsistencyError.
    static std::unique_ptr<EventStore> open(const std::filesystem::path& dir);

    EventStore(const EventStore&) = delete;
    EventStore& operator=(const EventStore&) = delete;

    /// Assigns the next event id, persists the record and updates the snapshot.
    /// Throws ConsistencyError (log unchanged) on an illegal transition.
    EventId append(EventRecord record) override;

    Snapshot read_global() const;
    NodeEventPage read_node(NodeId node) const;
    EventRecord read_event(EventId id) const;

    /// Copy of the log, oldest first.
    std::vector<EventRecord> events() const;
    /// Events with id strictly greater than `after`, oldest first.
    std::vector<EventRecord> events_after(EventId after) const;
    EventId last_event_id() const;

    const SimConfig& config() const noexcept { return config_; }
    const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

    /// Reader side: pick up lines appended by another process since the last
    /// call. Returns the number of new events. A truncated log (new run in the
    /// same directory) triggers a full reload.
    std::size_t refresh();

private:
    struct LoadTag
    {
    };
    EventStore(LoadTag, std::filesystem::path dir);

    void write_snapshot_locked() const;
    void ingest_locked(EventRecord e);
    std::size_t load_lines_locked();

    SimConfig config_;
    std::optional<std::filesystem::path> dir_;
    void publish_locked();

    mutable std::mutex mutex_;
    // read_global() only copies this pointer, so it never waits for an append.
    mutable std::mutex published_mutex_;
    std::shared_ptr<const Snapshot> published_;
    std::vector<EventRecord> log_;
    SnapshotFold fold_;
    std::uintmax_t read_offset_ = 0;
    bool reader_ = false;
    std::optional<Snapshot> persisted_;
    std::ofstream log_out_;
};

} // namespace eftos
