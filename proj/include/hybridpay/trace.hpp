#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hybridpay::sim {

inline constexpr const char* kTraceFormat = "hybridpay-trace/1";

/// JSON-lines run trace: a header, one record per event, an end record.
struct Trace {
    nlohmann::json header;
    std::vector<nlohmann::json> events;
    nlohmann::json end;

    std::string to_jsonl() const;
};

/// Throws ProtocolError(Malformed) on anything that is not a trace.
Trace parse_trace(const std::string& text);
Trace load_trace(const std::string& path);

/// Hex SHA-256 of the snapshot's compact JSON dump.
std::string snapshot_digest(const nlohmann::json& snapshot);

struct Violation {
    /// Event index, or empty for run-level findings.
    std::optional<std::size_t> index;
    std::string invariant;
    std::string detail;
};

nlohmann::json to_json(const Violation& v);

/// Checks every invariant the trace format makes observable.
std::vector<Violation> audit_trace(const Trace& trace);

} // namespace hybridpay::sim
