#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vaxpulse/common.hpp"

namespace vaxpulse::ingest {

struct RawPost {
    std::string id;
    std::int64_t timestamp = 0;  // epoch seconds, UTC
    std::string text;
    std::int64_t retweets = 0;
    std::int64_t likes = 0;

    Date date() const { return utc_date(timestamp); }
    std::int64_t interactions() const { return 1 + retweets + likes; }
};

struct IngestStats {
    std::size_t read = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t malformed_dropped = 0;
};

struct Corpus {
    std::vector<RawPost> posts;  // ascending timestamp, ties by id
    IngestStats stats;
};

struct IngestOptions {
    std::optional<Date> window_start;  // inclusive
    std::optional<Date> window_end;    // inclusive
    // When set, records carrying a "lang" field different from this code are
    // dropped (counted as malformed). Records without the field always pass.
    std::optional<std::string> lang;
};

// One JSON object per line: {"id", "created_at", "text", "retweets", "likes",
// optional "lang"}. Malformed lines and out-of-window records are skipped and
// counted; duplicate ids keep the first occurrence in file order.
Corpus ingest_jsonl(const std::filesystem::path& path, const IngestOptions& opt = {});
Corpus ingest_jsonl_stream(std::istream& in, const IngestOptions& opt = {});

struct InteractionDay {
    Date date;
    std::int64_t tweets = 0;
    std::int64_t interactions = 0;  // tweets + likes + retweets
};

using InteractionSeries = std::vector<InteractionDay>;

// Daily totals over the corpus span, contiguous and zero-filled.
InteractionSeries interaction_series(const Corpus& corpus);

struct Peak {
    Date date;
    std::int64_t interactions = 0;
    double prominence = 0.0;
};

// Local maxima of the interaction series whose topographic prominence is at
// least min_prominence, sorted by interactions descending (ties: earlier date
// first). Leading/trailing zero-interaction days carry no signal and are
// ignored, so padding the series with empty days does not change the result.
std::vector<Peak> detect_peaks(const InteractionSeries& series, double min_prominence);

void write_interaction_csv(std::ostream& out, const InteractionSeries& series);
void write_corpus_jsonl(std::ostream& out, const Corpus& corpus);

}  // namespace vaxpulse::ingest
