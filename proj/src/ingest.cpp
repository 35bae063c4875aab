#include "vaxpulse/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

namespace vaxpulse::ingest {

using nlohmann::json;

namespace {

std::optional<RawPost> parse_record(const std::string& line, const IngestOptions& opt) {
    json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object()) return std::nullopt;

    auto id_it = rec.find("id");
    auto ts_it = rec.find("created_at");
    auto text_it = rec.find("text");
    if (id_it == rec.end() || ts_it == rec.end() || text_it == rec.end()) return std::nullopt;
    if (!ts_it->is_string() || !text_it->is_string()) return std::nullopt;

    RawPost post;
    if (id_it->is_string())
        post.id = id_it->get<std::string>();
    else if (id_it->is_number_integer())
        post.id = std::to_string(id_it->get<std::int64_t>());
    else
        return std::nullopt;
    if (post.id.empty()) return std::nullopt;

    auto ts = parse_iso8601(ts_it->get<std::string>());
    if (!ts) return std::nullopt;
    post.timestamp = *ts;
    post.text = text_it->get<std::string>();

    for (auto [key, dest] : {std::pair{"retweets", &post.retweets}, {"likes", &post.likes}}) {
        auto it = rec.find(key);
        if (it == rec.end()) continue;  // absent counts default to 0
        if (!it->is_number_integer()) return std::nullopt;
        *dest = it->get<std::int64_t>();
        if (*dest < 0) return std::nullopt;
    }

    if (opt.lang) {
        auto it = rec.find("lang");
        if (it != rec.end() && (!it->is_string() || it->get<std::string>() != *opt.lang))
            return std::nullopt;
    }

    Date d = post.date();
    if (opt.window_start && d < *opt.window_start) return std::nullopt;
    if (opt.window_end && d > *opt.window_end) return std::nullopt;
    return post;
}

}  // namespace

Corpus ingest_jsonl_stream(std::istream& in, const IngestOptions& opt) {
    Corpus corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        ++corpus.stats.read;
        auto post = parse_record(line, opt);
        if (!post) {
            ++corpus.stats.malformed_dropped;
            continue;
        }
        if (!seen.insert(post->id).second) {
            ++corpus.stats.duplicates_dropped;
            continue;
        }
        corpus.posts.push_back(std::move(*post));
    }
    std::stable_sort(corpus.posts.begin(), corpus.posts.end(),
                     [](const RawPost& a, const RawPost& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         return a.id < b.id;
                     });
    return corpus;
}

Corpus ingest_jsonl(const std::filesystem::path& path, const IngestOptions& opt) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input file: " + path.string());
    return ingest_jsonl_stream(in, opt);
}

InteractionSeries interaction_series(const Corpus& corpus) {
    if (corpus.posts.empty()) throw EmptyInput("interaction_series: empty corpus");
    Date first = corpus.posts.front().date();
    Date last = first;
    for (const auto& p : corpus.posts) {
        Date d = p.date();
        if (d < first) first = d;
        if (last < d) last = d;
    }
    InteractionSeries series(static_cast<std::size_t>(last - first) + 1);
    for (std::size_t i = 0; i < series.size(); ++i) series[i].date = first + static_cast<int>(i);
    for (const auto& p : corpus.posts) {
        auto& day = series[static_cast<std::size_t>(p.date() - first)];
        day.tweets += 1;
        day.interactions += p.interactions();
    }
    return series;
}

std::vector<Peak> detect_peaks(const InteractionSeries& series, double min_prominence) {
    if (series.empty()) throw ContractViolation("detect_peaks: empty series");
    if (!(min_prominence > 0)) throw ContractViolation("detect_peaks: min_prominence must be > 0");

    // Trim zero-interaction days at both ends; they are padding, not signal.
    std::size_t lo = 0, hi = series.size();
    while (lo < hi && series[lo].interactions == 0) ++lo;
    while (hi > lo && series[hi - 1].interactions == 0) --hi;

    std::vector<Peak> peaks;
    std::size_t i = lo;
    while (i < hi) {
        std::size_t j = i;
        while (j + 1 < hi && series[j + 1].interactions == series[i].interactions) ++j;
        // plateau [i, j]; interior strict local maximum?
        bool rises = i > lo && series[i - 1].interactions < series[i].interactions;
        bool falls = j + 1 < hi && series[j + 1].interactions < series[i].interactions;
        if (rises && falls) {
            const std::int64_t h = series[i].interactions;
            // base on each side: minimum until a strictly higher sample or the end
            std::int64_t left_base = h, right_base = h;
            for (std::size_t k = i; k > lo;) {
                --k;
                if (series[k].interactions > h) break;
                left_base = std::min(left_base, series[k].interactions);
            }
            for (std::size_t k = j + 1; k < hi; ++k) {
                if (series[k].interactions > h) break;
                right_base = std::min(right_base, series[k].interactions);
            }
            double prom = static_cast<double>(h - std::max(left_base, right_base));
            if (prom >= min_prominence)
                peaks.push_back({series[i].date, h, prom});
        }
        i = j + 1;
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.interactions != b.interactions) return a.interactions > b.interactions;
        return a.date < b.date;
    });
    return peaks;
}

void write_interaction_csv(std::ostream& out, const InteractionSeries& series) {
    out << "date,tweets,interactions\n";
    for (const auto& d : series)
        out << d.date.to_string() << ',' << d.tweets << ',' << d.interactions << '\n';
}

void write_corpus_jsonl(std::ostream& out, const Corpus& corpus) {
    for (const auto& p : corpus.posts) {
        json rec{{"id", p.id},
                 {"created_at", utc_date(p.timestamp).to_string() + "T" + [&] {
                      std::int64_t s = p.timestamp % 86400;
                      if (s < 0) s += 86400;
                      char buf[16];
                      std::snprintf(buf, sizeof buf, "%02d:%02d:%02d",
                                    static_cast<int>(s / 3600), static_cast<int>(s / 60 % 60),
                                    static_cast<int>(s % 60));
                      return std::string(buf);
                  }() + "Z"},
                 {"text", p.text},
                 {"retweets", p.retweets},
                 {"likes", p.likes}};
        out << rec.dump() << '\n';
    }
}

}  // namespace vaxpulse::ingest
