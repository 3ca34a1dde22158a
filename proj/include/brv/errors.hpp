// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brv {

/// Error codes for everything the engine can refuse to do.
enum class Errc {
    // entry format
    malformed_frontmatter,
    invalid_timestamp,
    importance_out_of_range,
    // tree store
    root_not_found,
    unknown_path,
    io_failure,
    path_escapes_root,
    // lifecycle
    negative_elapsed,
    event_before_creation,
    now_before_update,
    weights_not_normalized,
    // search
    empty_query,
    negative_score,
    // adapter
    adapter_unavailable,
    adapter_timeout,
    script_exhausted,
    tool_validation,
    iteration_limit,
    // curation
    too_many_files,
    file_not_found,
    binary_file_rejected,
    // daemon
    queue_full,
    socket_in_use,
    daemon_unreachable,
    // configuration
    invalid_config,
};

std::string_view to_string(Errc code);

/// Single exception type carrying an Errc; per-operation curate failures
/// are reported in-band and never use this.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace brv
