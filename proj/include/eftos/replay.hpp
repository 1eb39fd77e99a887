#pragma once

#include "eftos/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eftos {

/// Outcome of re-deriving snapshot.json from events.jsonl and config.json.
struct ReplayReport
{
    std::filesystem::path directory;
    std::size_t events = 0;
    /// Illegal transitions and corrupt lines, each naming its log line.
    std::vector<std::string> problems;
    std::string expected;  // the fold, serialized canonically
    std::string actual;    // snapshot.json as found on disk
    /// 1-based line of snapshot.json where the two first differ.
    std::optional<std::size_t> first_difference;

    bool bytes_agree() const noexcept { return expected == actual; }
    bool agree() const noexcept { return problems.empty() && bytes_agree(); }
    std::string text() const;
};

/// Folds the raw log lines without the store's own fold and compares the
/// result byte for byte with the persisted snapshot. Throws IoError when the
/// directory, its config or its snapshot is missing or unreadable.
ReplayReport replay(const std::filesystem::path& dir);

} // namespace eftos
