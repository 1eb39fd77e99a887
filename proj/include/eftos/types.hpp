#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eftos {

using Tick = std::uint64_t;
using EventId = std::uint64_t;

struct NodeId
{
    std::uint32_t index = 0;

    constexpr NodeId() = default;
    constexpr explicit NodeId(std::uint32_t i) : index(i) {}

    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

struct ThreadId
{
    NodeId node;
    std::uint32_t local_index = 0;

    friend constexpr auto operator<=>(const ThreadId&, const ThreadId&) = default;
};

std::string to_string(NodeId n);
std::string to_string(const ThreadId& t);

enum class ComponentRole : std::uint8_t
{
    Manager,
    Agent,
    BackupAgent,
};

enum class ComponentStatus : std::uint8_t
{
    OK,
    Faulty,
    Isolated,
    Recovering,
    Killed,
};

inline constexpr ComponentStatus kAllStatuses[] = {
    ComponentStatus::OK,         ComponentStatus::Faulty, ComponentStatus::Isolated,
    ComponentStatus::Recovering, ComponentStatus::Killed,
};

std::string_view to_string(ComponentRole r);
std::string_view to_string(ComponentStatus s);
ComponentRole parse_role(std::string_view s);
ComponentStatus parse_status(std::string_view s);

/// The detect -> isolate -> recover graph. Every transition in an event log
/// must be one of these edges:
///   OK -> Faulty, Faulty -> Isolated, Isolated -> Recovering,
///   Isolated -> Killed, Recovering -> OK, Recovering -> Killed.
constexpr bool is_legal_transition(ComponentStatus from, ComponentStatus to) noexcept
{
    using S = ComponentStatus;
    switch (from)
    {
    case S::OK:
        return to == S::Faulty;
    case S::Faulty:
        return to == S::Isolated;
    case S::Isolated:
        return to == S::Recovering || to == S::Killed;
    case S::Recovering:
        return to == S::OK || to == S::Killed;
    case S::Killed:
        return false;
    }
    return false;
}

struct Transition
{
    ComponentStatus from = ComponentStatus::OK;
    ComponentStatus to = ComponentStatus::OK;

    friend constexpr bool operator==(const Transition&, const Transition&) = default;
};

enum class TrapKind : std::uint8_t
{
    DivZero,
    SegViol,
};

std::string_view to_string(TrapKind k);

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class InvalidTarget : public Error
{
public:
    using Error::Error;
};

class ConsistencyError : public Error
{
public:
    using Error::Error;
};

class NotFound : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    using Error::Error;
};

class ProtocolError : public Error
{
public:
    using Error::Error;
};

class ConflictError : public Error
{
public:
    using Error::Error;
};

class PreconditionError : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace eftos

template <>
struct std::hash<eftos::NodeId>
{
    std::size_t operator()(eftos::NodeId n) const noexcept { return std::hash<std::uint32_t>{}(n.index); }
};
