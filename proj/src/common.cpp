#include "vaxpulse/common.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>

namespace vaxpulse {

namespace {

// Howard Hinnant's civil-date algorithms (public domain).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::array<int, 3> civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

Date Date::from_ymd(int year, int month, int day) {
    return Date(static_cast<std::int32_t>(days_from_civil(year, month, day)));
}

std::optional<Date> Date::from_string(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0, m = 0, d = 0;
    if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) ||
        !parse_int(s.substr(8, 2), d))
        return std::nullopt;
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    return from_ymd(y, m, d);
}

std::string Date::to_string() const {
    auto [y, m, d] = civil_from_days(serial_);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
    return buf;
}

std::optional<std::int64_t> parse_iso8601(std::string_view s) {
    if (s.size() < 10) return std::nullopt;
    auto date = Date::from_string(s.substr(0, 10));
    if (!date) return std::nullopt;
    std::int64_t secs = static_cast<std::int64_t>(date->serial()) * 86400;
    if (s.size() == 10) return secs;
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    std::string_view rest = s.substr(11);
    if (rest.size() < 8 || rest[2] != ':' || rest[5] != ':') return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!parse_int(rest.substr(0, 2), hh) || !parse_int(rest.substr(3, 2), mm) ||
        !parse_int(rest.substr(6, 2), ss))
        return std::nullopt;
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    secs += hh * 3600 + mm * 60 + ss;
    rest = rest.substr(8);
    if (!rest.empty() && rest[0] == '.') {  // fractional seconds: ignored
        std::size_t i = 1;
        while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) ++i;
        if (i == 1) return std::nullopt;
        rest = rest.substr(i);
    }
    if (rest.empty()) return secs;
    if (rest == "Z") return secs;
    if ((rest[0] == '+' || rest[0] == '-') && (rest.size() == 6 || rest.size() == 5)) {
        int oh = 0, om = 0;
        std::string_view hs = rest.substr(1, 2);
        std::string_view ms = rest.size() == 6 ? rest.substr(4, 2) : rest.substr(3, 2);
        if (rest.size() == 6 && rest[3] != ':') return std::nullopt;
        if (!parse_int(hs, oh) || !parse_int(ms, om)) return std::nullopt;
        std::int64_t off = oh * 3600 + om * 60;
        return rest[0] == '+' ? secs - off : secs + off;
    }
    return std::nullopt;
}

Date utc_date(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    if (epoch_seconds < 0 && epoch_seconds % 86400 != 0) --days;
    return Date(static_cast<std::int32_t>(days));
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9E3779B97F4A7C15ull + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for digest: " + path);
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace vaxpulse
