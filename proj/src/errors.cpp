// SPDX-License-Identifier: Apache-2.0

#include "brv/errors.hpp"

namespace brv {

std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::malformed_frontmatter: return "malformed_frontmatter";
    case Errc::invalid_timestamp: return "invalid_timestamp";
    case Errc::importance_out_of_range: return "importance_out_of_range";
    case Errc::root_not_found: return "root_not_found";
    case Errc::unknown_path: return "unknown_path";
    case Errc::io_failure: return "io_failure";
    case Errc::path_escapes_root: return "path_escapes_root";
    case Errc::negative_elapsed: return "negative_elapsed";
    case Errc::event_before_creation: return "event_before_creation";
    case Errc::now_before_update: return "now_before_update";
    case Errc::weights_not_normalized: return "weights_not_normalized";
    case Errc::empty_query: return "empty_query";
    case Errc::negative_score: return "negative_score";
    case Errc::adapter_unavailable: return "adapter_unavailable";
    case Errc::adapter_timeout: return "adapter_timeout";
    case Errc::script_exhausted: return "script_exhausted";
    case Errc::tool_validation: return "tool_validation";
    case Errc::iteration_limit: return "iteration_limit";
    case Errc::too_many_files: return "too_many_files";
    case Errc::file_not_found: return "file_not_found";
    case Errc::binary_file_rejected: return "binary_file_rejected";
    case Errc::queue_full: return "queue_full";
    case Errc::socket_in_use: return "socket_in_use";
    case Errc::daemon_unreachable: return "daemon_unreachable";
    case Errc::invalid_config: return "invalid_config";
    }
    return "unknown";
}

} // namespace brv
