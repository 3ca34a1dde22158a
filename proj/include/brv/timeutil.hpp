// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace brv {

/// Seconds since the Unix epoch, UTC. Entry timestamps drop sub-second
/// precision, so this is the engine's native time unit.
using UtcSeconds = std::int64_t;

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff]Z` (also accepts a `+00:00` suffix).
/// Fractional seconds are dropped. Returns nullopt on anything else.
std::optional<UtcSeconds> parse_iso8601(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_iso8601(UtcSeconds t);

/// Fractional days between two instants.
inline double days_between(UtcSeconds from, UtcSeconds to) {
    return static_cast<double>(to - from) / 86400.0;
}

/// Wall-clock now, truncated to seconds.
UtcSeconds utc_now();

} // namespace brv
