#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vaxpulse {

// ---------------------------------------------------------------------------
// Error taxonomy. Everything thrown by the library derives from Error so the
// CLI can map failures onto exit codes in one place.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractViolation : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct InsufficientData : Error {
    using Error::Error;
};
struct DegenerateTraining : Error {
    using Error::Error;
};
struct StratificationError : Error {
    using Error::Error;
};
struct DegenerateNull : Error {
    using Error::Error;
};
struct RequiresMonteCarlo : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Calendar dates. One UTC calendar day, stored as days since 1970-01-01.
// ---------------------------------------------------------------------------

class Date {
public:
    Date() = default;
    explicit Date(std::int32_t serial) : serial_(serial) {}

    static Date from_ymd(int year, int month, int day);
    static std::optional<Date> from_string(std::string_view s);  // "YYYY-MM-DD"

    std::int32_t serial() const { return serial_; }
    std::string to_string() const;

    Date operator+(int days) const { return Date(serial_ + days); }
    Date operator-(int days) const { return Date(serial_ - days); }
    int operator-(Date other) const { return serial_ - other.serial_; }
    Date& operator++() {
        ++serial_;
        return *this;
    }

    friend bool operator==(Date a, Date b) { return a.serial_ == b.serial_; }
    friend auto operator<=>(Date a, Date b) { return a.serial_ <=> b.serial_; }

private:
    std::int32_t serial_ = 0;
};

// Epoch seconds (UTC) of an ISO-8601 timestamp. Accepts "YYYY-MM-DD",
// "YYYY-MM-DDTHH:MM:SS", optional fractional seconds and "Z" / "+hh:mm"
// offsets. Returns nullopt on anything else.
std::optional<std::int64_t> parse_iso8601(std::string_view s);

// UTC calendar day containing an epoch-seconds timestamp.
Date utc_date(std::int64_t epoch_seconds);

// ---------------------------------------------------------------------------
// Seeding. Every stochastic routine takes a master seed and derives one
// sub-seed per independent stream with derive_seed(master, stream); streams
// are numbered by replicate index, day serial, fold index, etc. This keeps
// replicates independent and results invariant to execution order.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Small string helpers shared by the CSV/CLI layers.
// ---------------------------------------------------------------------------

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

// FNV-1a 64-bit digest; used for manifest hashes and input digests.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

// Format a double with enough digits to round-trip; locale-independent.
std::string format_double(double v);

}  // namespace vaxpulse
