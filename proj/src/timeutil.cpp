// SPDX-License-Identifier: Apache-2.0

#include "brv/timeutil.hpp"

#include <chrono>
#include <cstdio>

namespace brv {

namespace {

// Civil <-> epoch-day conversions (Hinnant's algorithms); avoids any
// dependence on the host timezone database.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

bool parse_uint(std::string_view s, std::size_t pos, std::size_t n, unsigned& out) {
    if (pos + n > s.size()) return false;
    unsigned v = 0;
    for (std::size_t i = 0; i < n; i++) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    out = v;
    return true;
}

} // namespace

std::optional<UtcSeconds> parse_iso8601(std::string_view text) {
    // YYYY-MM-DDTHH:MM:SS with optional .fff and a Z / +00:00 suffix.
    unsigned year, month, day, hour, minute, second;
    if (!parse_uint(text, 0, 4, year)) return std::nullopt;
    if (text.size() < 20 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (text[10] != 'T' && text[10] != 't' && text[10] != ' ') return std::nullopt;
    if (text[13] != ':' || text[16] != ':') return std::nullopt;
    if (!parse_uint(text, 5, 2, month) || !parse_uint(text, 8, 2, day) ||
        !parse_uint(text, 11, 2, hour) || !parse_uint(text, 14, 2, minute) ||
        !parse_uint(text, 17, 2, second)) {
        return std::nullopt;
    }
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        pos++;
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            pos++;
            digits++;
        }
        if (digits == 0) return std::nullopt;
    }
    std::string_view suffix = text.substr(pos);
    if (suffix != "Z" && suffix != "z" && suffix != "+00:00") return std::nullopt;

    if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
    if (hour > 23 || minute > 59 || second > 59) return std::nullopt;

    std::int64_t days = days_from_civil(static_cast<int>(year), month, day);
    int ry;
    unsigned rm, rd;
    civil_from_days(days, ry, rm, rd);
    if (ry != static_cast<int>(year) || rm != month || rd != day) return std::nullopt; // e.g. Feb 30
    return days * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_iso8601(UtcSeconds t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", y, m, d,
                  static_cast<long long>(rem / 3600), static_cast<long long>((rem / 60) % 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

UtcSeconds utc_now() {
    using namespace std::chrono;
    return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

} // namespace brv
