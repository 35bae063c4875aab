#include "vaxpulse/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vaxpulse/agreement.hpp"
#include "vaxpulse/classify.hpp"
#include "vaxpulse/polarity.hpp"
#include "vaxpulse/simulate.hpp"
#include "vaxpulse/svg.hpp"
#include "vaxpulse/version.hpp"

namespace vaxpulse::report {

namespace fs = std::filesystem;
using nlohmann::json;

// ----------------------------------------------------------------------------
// Manifest and artifact writing
// ----------------------------------------------------------------------------

void RunManifest::finalize() {
    version = kVersion;
    std::string canon = subcommand + '\n' + version + '\n' + std::to_string(seed) + '\n';
    for (const auto& a : args) canon += a + '\n';
    auto sorted = inputs;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [path, digest] : sorted) canon += path + '=' + digest + '\n';
    hash = hex64(fnv1a64(canon));

    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    created_utc = buf;
}

std::string RunManifest::to_json() const {
    json j;
    j["tool"] = "vaxpulse";
    j["version"] = version;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["args"] = args;
    j["inputs"] = json::object();
    for (const auto& [path, digest] : inputs) j["inputs"][path] = digest;
    j["manifest_hash"] = hash;
    j["created_utc"] = created_utc;
    return j.dump(2);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write: " + tmp.string());
        out << content;
        if (!out.good()) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

void write_csv_artifact(const fs::path& path, const std::string& payload,
                        const RunManifest& manifest) {
    write_file_atomic(path, "# manifest: " + manifest.hash + "\n" + payload);
}

void write_json_artifact(const fs::path& path, const std::string& payload,
                         const RunManifest& manifest) {
    json j = json::parse(payload);
    if (!j.is_object()) j = json{{"data", std::move(j)}};
    j["manifest"] = manifest.hash;
    write_file_atomic(path, j.dump(2) + "\n");
}

void write_svg_artifact(const fs::path& path, const std::string& payload,
                        const RunManifest& manifest) {
    write_file_atomic(path, payload + "<!-- manifest: " + manifest.hash + " -->\n");
}

// ----------------------------------------------------------------------------
// Figures
// ----------------------------------------------------------------------------

namespace {

constexpr double kWidth = 900, kHeight = 420;
constexpr double kLeft = 64, kRight = 20, kTop = 28, kBottom = 48;

const char* kCompColors[3] = {"#2166ac", "#b2182b", "#8073ac"};  // F, C, U
const char* kCompNames[3] = {"favourable", "contrary", "undecided"};

std::string short_num(double v) {
    char buf[32];
    if (std::abs(v) >= 1000)
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void draw_axes(svg::Document& doc, const svg::Scale& xs, const svg::Scale& ys, Date first,
               Date last, double y_lo, double y_hi, const std::string& y_label) {
    const double x0 = xs(static_cast<double>(first.serial()));
    const double x1 = xs(static_cast<double>(last.serial()));
    const double yb = ys(y_lo), yt = ys(y_hi);
    doc.line(x0, yb, x1, yb, "#444444");
    doc.line(x0, yb, x0, yt, "#444444");
    for (int t = 0; t <= 5; ++t) {
        const double v = y_lo + (y_hi - y_lo) * t / 5.0;
        const double y = ys(v);
        doc.line(x0 - 4, y, x0, y, "#444444");
        doc.text(x0 - 8, y + 4, short_num(v), 10, "end");
    }
    const int span = last - first;
    for (int t = 0; t <= 6; ++t) {
        Date d = first + span * t / 6;
        const double x = xs(static_cast<double>(d.serial()));
        doc.line(x, yb, x, yb + 4, "#444444");
        doc.text(x, yb + 18, d.to_string(), 9, "middle");
    }
    doc.text(14, (yb + yt) / 2, y_label, 11, "middle");
}

void draw_significance_markers(svg::Document& doc, const svg::Scale& xs,
                               const distest::TestRun& run, double base_y) {
    // blue circles 10%, green squares 5%, purple diamonds 1%
    for (const auto& o : run.outcomes) {
        const double x = xs(static_cast<double>(o.date.serial()));
        if (o.significant(0.10)) doc.circle(x, base_y, 3, "#4477cc");
        if (o.significant(0.05)) doc.rect(x - 3, base_y - 15, 6, 6, "#33a02c");
        if (o.significant(0.01)) doc.diamond(x, base_y - 24, 4, "#6a3d9a");
    }
    doc.text(kWidth - kRight, base_y + 3, "10%", 9, "end", "#4477cc");
    doc.text(kWidth - kRight, base_y - 9, "5%", 9, "end", "#33a02c");
    doc.text(kWidth - kRight, base_y - 21, "1%", 9, "end", "#6a3d9a");
}

std::string figure_interactions(const ingest::InteractionSeries& series,
                                const std::vector<ingest::Peak>& peaks) {
    svg::Document doc(kWidth, kHeight);
    if (series.empty()) return doc.str();
    std::int64_t max_y = 1;
    for (const auto& d : series) max_y = std::max(max_y, d.interactions);
    const Date first = series.front().date, last = series.back().date;
    svg::Scale xs{static_cast<double>(first.serial()), static_cast<double>(last.serial()), kLeft,
                  kWidth - kRight};
    svg::Scale ys{0, static_cast<double>(max_y) * 1.05, kHeight - kBottom, kTop};

    doc.text(kWidth / 2, 16, "Daily interactions (tweets + likes + retweets)", 13, "middle");
    draw_axes(doc, xs, ys, first, last, 0, static_cast<double>(max_y) * 1.05, "interactions");

    std::vector<std::pair<double, double>> pts;
    pts.reserve(series.size());
    for (const auto& d : series)
        pts.emplace_back(xs(static_cast<double>(d.date.serial())),
                         ys(static_cast<double>(d.interactions)));
    doc.polyline(pts, "#2166ac", 1.2);

    std::size_t labelled = 0;
    for (const auto& p : peaks) {
        const double x = xs(static_cast<double>(p.date.serial()));
        const double y = ys(static_cast<double>(p.interactions));
        doc.circle(x, y, 4, "#d7301f");
        if (labelled++ < 3) doc.text(x, y - 8, p.date.to_string(), 9, "middle", "#d7301f");
    }
    return doc.str();
}

std::string figure_proportions(const smooth::SmoothedSeries& smoothed,
                               const distest::TestRun& run, const std::string& title) {
    svg::Document doc(kWidth, kHeight);
    const Date first = smoothed.dates.front(), last = smoothed.dates.back();
    svg::Scale xs{static_cast<double>(first.serial()), static_cast<double>(last.serial()), kLeft,
                  kWidth - kRight};
    svg::Scale ys{0, 1, kHeight - kBottom, kTop};

    doc.text(kWidth / 2, 16, title, 13, "middle");
    draw_axes(doc, xs, ys, first, last, 0, 1, "proportion");
    for (int c = 0; c < 3; ++c) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < smoothed.size(); ++i)
            pts.emplace_back(xs(static_cast<double>(smoothed.dates[i].serial())),
                             ys(smoothed.smoothed[c][i]));
        doc.polyline(pts, kCompColors[c], 1.4);
        doc.text(kLeft + 8 + 110 * c, kTop + 2, kCompNames[c], 10, "start", kCompColors[c]);
    }
    draw_significance_markers(doc, xs, run, kHeight - kBottom - 8);
    return doc.str();
}

std::string figure_variance(const distest::TestRun& run) {
    svg::Document doc(kWidth, kHeight);
    if (run.outcomes.empty()) return doc.str();
    double max_y = 1;
    for (const auto& o : run.outcomes) max_y = std::max(max_y, o.statistic);
    const Date first = run.outcomes.front().date, last = run.outcomes.back().date;
    svg::Scale xs{static_cast<double>(first.serial()), static_cast<double>(last.serial()), kLeft,
                  kWidth - kRight};
    svg::Scale ys{0, max_y * 1.05, kHeight - kBottom, kTop};

    doc.text(kWidth / 2, 16, "Running variance test of the favourable proportion", 13, "middle");
    draw_axes(doc, xs, ys, first, last, 0, max_y * 1.05, "chi-square statistic");
    std::vector<std::pair<double, double>> pts;
    for (const auto& o : run.outcomes)
        pts.emplace_back(xs(static_cast<double>(o.date.serial())), ys(o.statistic));
    doc.polyline(pts, "#333333", 1.2);
    draw_significance_markers(doc, xs, run, kHeight - kBottom - 8);
    return doc.str();
}

std::string figure_trend(const smooth::SmoothedSeries& smoothed,
                         const smooth::TrendFit* const fits[3]) {
    const double panel_h = 240, width = kWidth;
    svg::Document doc(width, panel_h * 3 + 20);
    const Date first = smoothed.dates.front(), last = smoothed.dates.back();
    svg::Scale xs{static_cast<double>(first.serial()), static_cast<double>(last.serial()), kLeft,
                  width - kRight};

    for (int c = 0; c < 3; ++c) {
        const auto& ys_data = smoothed.smoothed[c];
        const double top = panel_h * c + 26;
        const double bottom = panel_h * (c + 1) - 34;
        auto [mn, mx] = std::minmax_element(ys_data.begin(), ys_data.end());
        const double pad = std::max(0.02, (*mx - *mn) * 0.25);
        const double lo = std::max(0.0, *mn - pad), hi = std::min(1.0, *mx + pad);
        svg::Scale ys{lo, hi, bottom, top};

        doc.text(width / 2, top - 8,
                 std::string("Smoothed ") + kCompNames[c] + " proportion with polynomial trends",
                 12, "middle");
        draw_axes(doc, xs, ys, first, last, lo, hi, kCompNames[c]);

        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < smoothed.size(); ++i)
            pts.emplace_back(xs(static_cast<double>(smoothed.dates[i].serial())),
                             ys(std::clamp(ys_data[i], lo, hi)));
        doc.polyline(pts, kCompColors[c], 1.6);

        if (fits[c]) {
            const auto& fit = *fits[c];
            const char* fit_colors[2] = {"#888888", "#222222"};
            for (int deg = 1; deg <= 2 && deg <= static_cast<int>(fit.degrees.size()); ++deg) {
                std::vector<std::pair<double, double>> fpts;
                for (std::size_t i = 0; i < smoothed.size(); ++i) {
                    const double u = (static_cast<double>(i) - fit.u_mean) / fit.u_scale;
                    const double v = smooth::eval_poly(fit.degrees[deg - 1].coeffs, u);
                    fpts.emplace_back(xs(static_cast<double>(smoothed.dates[i].serial())),
                                      ys(std::clamp(v, lo, hi)));
                }
                doc.polyline(fpts, fit_colors[deg - 1], 1.0);
                char note[96];
                std::snprintf(note, sizeof note, "degree %d: R^2 = %.3f", deg,
                              fit.degrees[deg - 1].r2);
                doc.text(width - kRight - 6, top + 14 + 13 * deg, note, 10, "end",
                         fit_colors[deg - 1]);
            }
            char sel[64];
            std::snprintf(sel, sizeof sel, "selected degree: %d", fit.selected);
            doc.text(width - kRight - 6, top + 14, sel, 10, "end");
        }
    }
    return doc.str();
}

}  // namespace

std::map<std::string, std::string> emit_figures(const FigureInputs& in) {
    std::map<std::string, std::string> figures;
    if (in.interactions) {
        static const std::vector<ingest::Peak> no_peaks;
        figures["fig1_interactions.svg"] =
            figure_interactions(*in.interactions, in.peaks ? *in.peaks : no_peaks);
    }
    if (in.basic) {
        if (!in.smoothed)
            throw ContractViolation("fig2 needs the smoothed series; run the smooth subcommand");
        figures["fig2_basic_test.svg"] =
            figure_proportions(*in.smoothed, *in.basic,
                               "Smoothed polarity proportions with basic multinomial test flags");
    }
    if (in.running) {
        if (!in.smoothed)
            throw ContractViolation("fig3 needs the smoothed series; run the smooth subcommand");
        figures["fig3_running_test.svg"] =
            figure_proportions(*in.smoothed, *in.running,
                               "Smoothed polarity proportions with running multinomial test flags");
    }
    if (in.variance) figures["fig4_variance_test.svg"] = figure_variance(*in.variance);
    if (in.smoothed && (in.trend_fits[0] || in.trend_fits[1] || in.trend_fits[2]))
        figures["fig5_trend.svg"] = figure_trend(*in.smoothed, in.trend_fits);
    return figures;
}

// ----------------------------------------------------------------------------
// CLI
// ----------------------------------------------------------------------------

namespace {

struct CommonOpts {
    std::string out_dir;
    std::uint64_t seed = 0;
};

RunManifest make_manifest(const std::string& subcommand, const CommonOpts& common,
                          const std::vector<std::string>& args,
                          const std::vector<std::string>& input_paths) {
    RunManifest m;
    m.subcommand = subcommand;
    m.seed = common.seed;
    // the output directory is where artifacts land, not part of the run's
    // configuration; leaving it out keeps the hash stable across locations
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out") {
            ++i;
            continue;
        }
        m.args.push_back(args[i]);
    }
    for (const auto& p : input_paths) {
        if (!fs::exists(p)) throw IoError("missing input file: " + p);
        m.inputs.emplace_back(p, hex64(fnv1a64_file(p)));
    }
    m.finalize();
    return m;
}

fs::path ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw ContractViolation("--out directory is required");
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::unordered_map<std::string, classify::PolarityLabel> read_labels_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::unordered_map<std::string, classify::PolarityLabel> map;
    for (auto& [id, label] : classify::read_labels_csv(in)) map[id] = label;
    return map;
}

polarity::PolaritySeries load_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return polarity::read_series_csv(in);
}

std::vector<double> parse_alpha_list(const std::string& csv) {
    std::vector<double> alphas;
    for (const auto& field : split(csv, ','))
        if (!trim(field).empty()) alphas.push_back(std::stod(trim(field)));
    if (alphas.empty()) throw ContractViolation("--alpha: empty list");
    for (double a : alphas)
        if (!(a > 0 && a < 1)) throw ContractViolation("--alpha: levels must be in (0,1)");
    return alphas;
}

json requested_levels_json(const distest::TestRun& run, const std::vector<double>& alphas) {
    json out = json::array();
    for (double a : alphas) {
        std::size_t count = 0;
        for (const auto& o : run.outcomes) count += o.significant(a);
        out.push_back({{"alpha", a},
                       {"significant_days", count},
                       {"expected_under_null", a * static_cast<double>(run.summary.tested)}});
    }
    return out;
}

std::string series_csv_string(const polarity::PolaritySeries& series) {
    std::ostringstream ss;
    polarity::write_series_csv(ss, series);
    return ss.str();
}

// tokenizes once and featurizes against a vocabulary
std::vector<text::TokenList> tokenize_corpus(const ingest::Corpus& corpus) {
    std::vector<text::TokenList> tokens(corpus.posts.size());
    for (std::size_t i = 0; i < corpus.posts.size(); ++i)
        tokens[i] = text::tokenize(corpus.posts[i].text);
    return tokens;
}

struct IngestFlags {
    std::string in_file;
    std::string window_start, window_end, lang;
    double min_prominence = 0;

    ingest::IngestOptions options() const {
        ingest::IngestOptions opt;
        if (!window_start.empty()) {
            auto d = Date::from_string(window_start);
            if (!d) throw ContractViolation("bad --window-start: " + window_start);
            opt.window_start = d;
        }
        if (!window_end.empty()) {
            auto d = Date::from_string(window_end);
            if (!d) throw ContractViolation("bad --window-end: " + window_end);
            opt.window_end = d;
        }
        if (!lang.empty()) opt.lang = lang;
        return opt;
    }
};

int cmd_ingest(const CommonOpts& common, const IngestFlags& flags,
               const std::vector<std::string>& args) {
    auto manifest = make_manifest("ingest", common, args, {flags.in_file});
    auto corpus = ingest::ingest_jsonl(flags.in_file, flags.options());
    fs::path out = ensure_out_dir(common.out_dir);

    {
        std::ostringstream ss;
        ingest::write_corpus_jsonl(ss, corpus);
        write_file_atomic(out / "corpus.jsonl", ss.str());
    }
    json stats{{"read", corpus.stats.read},
               {"retained", corpus.posts.size()},
               {"duplicates_dropped", corpus.stats.duplicates_dropped},
               {"malformed_dropped", corpus.stats.malformed_dropped}};
    write_json_artifact(out / "ingest_stats.json", stats.dump(), manifest);

    if (!corpus.posts.empty()) {
        auto series = ingest::interaction_series(corpus);
        std::ostringstream ss;
        ingest::write_interaction_csv(ss, series);
        write_csv_artifact(out / "interactions.csv", ss.str(), manifest);
        if (flags.min_prominence > 0) {
            auto peaks = ingest::detect_peaks(series, flags.min_prominence);
            std::ostringstream ps;
            ps << "date,interactions,prominence\n";
            for (const auto& p : peaks)
                ps << p.date.to_string() << ',' << p.interactions << ','
                   << format_double(p.prominence) << '\n';
            write_csv_artifact(out / "peaks.csv", ps.str(), manifest);
        }
    }
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "ingest: read " << corpus.stats.read << ", retained " << corpus.posts.size()
              << ", duplicates " << corpus.stats.duplicates_dropped << ", malformed "
              << corpus.stats.malformed_dropped << "\n";
    return 0;
}

struct TrainFlags {
    std::string corpus_file, labels_file, algo = "svm";
    std::size_t min_count = 2;
    int epochs = 10;
    double reg = 1e-2;
    double nb_alpha = 1.0;
};

int cmd_train(const CommonOpts& common, const TrainFlags& flags,
              const std::vector<std::string>& args) {
    auto manifest = make_manifest("train", common, args, {flags.corpus_file, flags.labels_file});
    auto corpus = ingest::ingest_jsonl(flags.corpus_file);
    auto labels = read_labels_map(flags.labels_file);

    std::vector<text::TokenList> docs;
    std::vector<classify::PolarityLabel> doc_labels;
    std::vector<std::string> doc_ids;
    for (const auto& post : corpus.posts) {
        auto it = labels.find(post.id);
        if (it == labels.end()) continue;
        docs.push_back(text::tokenize(post.text));
        doc_labels.push_back(it->second);
        doc_ids.push_back(post.id);
    }
    if (docs.empty()) throw ContractViolation("train: no labelled posts found in corpus");

    auto vocab = text::build_vocabulary(docs, flags.min_count);
    std::vector<classify::LabeledPost> data(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i)
        data[i] = {doc_ids[i], text::featurize(docs[i], vocab), doc_labels[i]};

    classify::LinearModel model;
    if (flags.algo == "svm") {
        model = classify::train_svm(data, vocab.size(), {flags.epochs, flags.reg},
                                    derive_seed(common.seed, 0x7261u));
    } else if (flags.algo == "nb") {
        model = classify::train_nb(data, vocab.size(), flags.nb_alpha);
    } else {
        throw ContractViolation("train: unknown --algo " + flags.algo + " (svm or nb)");
    }
    model.vocab_ref = hex64(fnv1a64(vocab.to_json()));

    fs::path out = ensure_out_dir(common.out_dir);
    write_json_artifact(out / "model.json", model.to_json(), manifest);
    write_json_artifact(out / "vocab.json", vocab.to_json(), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "train: " << flags.algo << " on " << data.size() << " posts, |V| = "
              << vocab.size() << "\n";
    return 0;
}

struct ClassifyFlags {
    std::string corpus_file, model_file, vocab_file;
};

int cmd_classify(const CommonOpts& common, const ClassifyFlags& flags,
                 const std::vector<std::string>& args) {
    auto manifest = make_manifest("classify", common, args,
                                  {flags.corpus_file, flags.model_file, flags.vocab_file});
    auto corpus = ingest::ingest_jsonl(flags.corpus_file);
    auto model = classify::LinearModel::from_json(slurp(flags.model_file));
    auto vocab = text::Vocabulary::from_json(slurp(flags.vocab_file));
    if (vocab.size() != model.vocab_size)
        throw ContractViolation("classify: vocabulary size does not match the model");
    if (!model.vocab_ref.empty() && model.vocab_ref != hex64(fnv1a64(vocab.to_json())))
        throw ContractViolation("classify: vocabulary digest does not match the model's vocab_ref");

    std::vector<std::pair<std::string, classify::PolarityLabel>> predictions;
    predictions.reserve(corpus.posts.size());
    for (const auto& post : corpus.posts) {
        auto fv = text::featurize(text::tokenize(post.text), vocab);
        predictions.emplace_back(post.id, model.predict(fv));
    }
    fs::path out = ensure_out_dir(common.out_dir);
    std::ostringstream ss;
    classify::write_labels_csv(ss, predictions);
    write_csv_artifact(out / "predictions.csv", ss.str(), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");

    std::array<std::size_t, classify::kNumClasses> counts{};
    for (const auto& [id, label] : predictions) ++counts[static_cast<int>(label)];
    std::cout << "classify: " << predictions.size() << " posts";
    for (int c = 0; c < classify::kNumClasses; ++c)
        std::cout << ", " << classify::label_code(static_cast<classify::PolarityLabel>(c)) << "="
                  << counts[c];
    std::cout << "\n";
    return 0;
}

struct EvalFlags {
    std::string pred_file, truth_file;
};

int cmd_eval(const CommonOpts& common, const EvalFlags& flags,
             const std::vector<std::string>& args) {
    auto manifest = make_manifest("eval", common, args, {flags.pred_file, flags.truth_file});
    auto pred_map = read_labels_map(flags.pred_file);
    std::ifstream in(flags.truth_file);
    if (!in) throw IoError("cannot open: " + flags.truth_file);
    auto truth_rows = classify::read_labels_csv(in);

    std::vector<classify::PolarityLabel> pred, truth;
    std::vector<std::string> missing;
    for (const auto& [id, label] : truth_rows) {
        auto it = pred_map.find(id);
        if (it == pred_map.end()) {
            missing.push_back(id);
            continue;
        }
        truth.push_back(label);
        pred.push_back(it->second);
    }
    if (!missing.empty())
        throw ContractViolation("eval: " + std::to_string(missing.size()) +
                                " truth ids lack predictions (first: " + missing.front() + ")");
    auto report = classify::evaluate(pred, truth);

    fs::path out = ensure_out_dir(common.out_dir);
    write_json_artifact(out / "eval.json", report.to_json(), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    classify::print_eval_table(std::cout, report);
    return 0;
}

struct AgreeFlags {
    std::string ratings_file;
    std::size_t correct = 0, total = 0;
    double level = 0.95;
};

int cmd_agree(const CommonOpts& common, const AgreeFlags& flags,
              const std::vector<std::string>& args) {
    std::vector<std::string> inputs;
    if (!flags.ratings_file.empty()) inputs.push_back(flags.ratings_file);
    auto manifest = make_manifest("agree", common, args, inputs);

    json j;
    if (!flags.ratings_file.empty()) {
        std::ifstream in(flags.ratings_file);
        if (!in) throw IoError("cannot open: " + flags.ratings_file);
        auto matrix = agree::read_rating_csv(in);
        const double kappa = agree::fleiss_kappa(matrix);
        j["fleiss_kappa"] = kappa;
        j["items"] = matrix.items();
        j["categories"] = matrix.categories();
        j["raters_per_item"] = matrix.raters_per_item();
        std::cout << "fleiss kappa: " << kappa << "\n";
    }
    if (flags.total > 0) {
        auto ci = agree::accuracy_ci(flags.correct, flags.total, flags.level);
        j["accuracy"] = {{"point", ci.point},
                         {"lower", ci.lower},
                         {"upper", ci.upper},
                         {"level", flags.level},
                         {"method", "Clopper-Pearson"}};
        std::cout << "accuracy: " << ci.point << " (" << ci.lower << " - " << ci.upper << ")\n";
    }
    if (j.empty()) throw ContractViolation("agree: provide --ratings and/or --correct/--total");

    fs::path out = ensure_out_dir(common.out_dir);
    write_json_artifact(out / "agreement.json", j.dump(), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    return 0;
}

struct AggregateFlags {
    std::string corpus_file, pred_file;
    std::string span_start, span_end;
    std::size_t boot_reps = 2000;
};

int cmd_aggregate(const CommonOpts& common, const AggregateFlags& flags,
                  const std::vector<std::string>& args) {
    auto manifest = make_manifest("aggregate", common, args, {flags.corpus_file, flags.pred_file});
    auto corpus = ingest::ingest_jsonl(flags.corpus_file);
    auto predictions = read_labels_map(flags.pred_file);

    std::optional<Date> start, end;
    if (!flags.span_start.empty()) start = Date::from_string(flags.span_start);
    if (!flags.span_end.empty()) end = Date::from_string(flags.span_end);
    auto series = polarity::aggregate(corpus, predictions, start, end);
    auto summary = polarity::yearly_summary(series, flags.boot_reps,
                                            derive_seed(common.seed, 0xB007u));

    fs::path out = ensure_out_dir(common.out_dir);
    write_csv_artifact(out / "polarity.csv", series_csv_string(series), manifest);
    write_json_artifact(out / "yearly.json", summary.to_json(), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "aggregate: " << series.nonzero_days() << " non-zero days, pooled F/C/U = "
              << format_double(summary.pooled[0]) << "/" << format_double(summary.pooled[1])
              << "/" << format_double(summary.pooled[2])
              << ", hesitancy = " << format_double(summary.hesitancy) << "\n";
    return 0;
}

struct TestFlags {
    std::string series_file;
    int window = 15;
    std::size_t mc_reps = 100000;
    std::int64_t exact_bound = 200;
    std::string alpha_csv = "0.10,0.05,0.01";
    std::string w_grid_csv;
    double sigma0 = 0;  // variance test override; 0 = derive from series
};

int cmd_test(const std::string& which, const CommonOpts& common, const TestFlags& flags,
             const std::vector<std::string>& args) {
    auto manifest = make_manifest("test-" + which, common, args, {flags.series_file});
    auto series = load_series(flags.series_file);
    auto alphas = parse_alpha_list(flags.alpha_csv);
    distest::MultinomialTestConfig cfg{flags.exact_bound, flags.mc_reps, common.seed};

    distest::TestRun run;
    std::string stem;
    if (which == "basic") {
        run = distest::basic_test(series, polarity::pooled_summary(series), cfg);
        stem = "basic";
    } else if (which == "running") {
        run = distest::running_test(series, flags.window, cfg);
        stem = "running";
    } else {
        double sigma0_sq = flags.sigma0;
        if (sigma0_sq <= 0) sigma0_sq = polarity::pooled_summary(series).var_pF;
        run = distest::running_variance_test(series, flags.window, sigma0_sq);
        stem = "variance";
    }

    fs::path out = ensure_out_dir(common.out_dir);
    {
        std::ostringstream ss;
        distest::write_outcomes_csv(ss, run);
        write_csv_artifact(out / ("outcomes_" + stem + ".csv"), ss.str(), manifest);
    }
    json j = json::parse(distest::summary_json(run));
    j["requested_levels"] = requested_levels_json(run, alphas);
    write_json_artifact(out / ("summary_" + stem + ".json"), j.dump(), manifest);

    if (which == "running" && !flags.w_grid_csv.empty()) {
        std::vector<int> grid;
        for (const auto& f : split(flags.w_grid_csv, ','))
            if (!trim(f).empty()) grid.push_back(std::stoi(trim(f)));
        auto table = distest::window_sensitivity(series, grid, cfg);
        std::ostringstream ss;
        distest::write_sensitivity_csv(ss, table);
        write_csv_artifact(out / "sensitivity.csv", ss.str(), manifest);
        write_json_artifact(out / "sensitivity.json", distest::sensitivity_json(table), manifest);
    }
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");

    std::cout << "test-" << which << ": " << run.summary.tested << " days tested";
    for (std::size_t i = 0; i < distest::kAlphas.size(); ++i)
        std::cout << ", sig@" << distest::kAlphas[i] << " = " << run.summary.significant[i]
                  << " (exp " << format_double(run.summary.expected(distest::kAlphas[i])) << ")";
    std::cout << "\n";
    return 0;
}

struct SmoothFlags {
    std::string series_file;
    double h = 0;  // 0 = cross-validate
    std::string h_grid = "0.005,0.5,30";
    bool count_weighted = false;
};

std::vector<double> parse_h_grid(const std::string& csv) {
    auto parts = split(csv, ',');
    if (parts.size() != 3) throw ContractViolation("--h-grid expects lo,hi,n");
    return smooth::log_spaced_grid(std::stod(parts[0]), std::stod(parts[1]),
                                   std::stoi(parts[2]));
}

int cmd_smooth(const CommonOpts& common, const SmoothFlags& flags,
               const std::vector<std::string>& args) {
    auto manifest = make_manifest("smooth", common, args, {flags.series_file});
    auto series = load_series(flags.series_file);

    std::vector<double> pf;
    for (const auto& d : series.days)
        if (d.n() > 0) pf.push_back(d.pF());

    smooth::CvResult cv;
    double h = flags.h;
    bool used_cv = false;
    if (h <= 0) {
        auto grid = parse_h_grid(flags.h_grid);
        cv = smooth::cv_bandwidth(pf, grid);
        h = cv.h_star;
        used_cv = true;
    }
    auto smoothed = smooth::smooth_series(series, h, flags.count_weighted);

    fs::path out = ensure_out_dir(common.out_dir);
    {
        std::ostringstream ss;
        smooth::write_smoothed_csv(ss, smoothed);
        write_csv_artifact(out / "smoothed.csv", ss.str(), manifest);
    }
    write_json_artifact(out / "smooth.json",
                        smooth::smooth_meta_json(smoothed, used_cv ? &cv : nullptr), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "smooth: h = " << h << (used_cv ? " (cross-validated)" : "")
              << (cv.constant_series ? " [constant series]" : "") << "\n";
    return 0;
}

struct FitFlags {
    std::string series_file;
    double h = 0;
    std::string h_grid = "0.005,0.5,30";
    int d_max = 4;
};

int cmd_fit(const CommonOpts& common, const FitFlags& flags,
            const std::vector<std::string>& args) {
    auto manifest = make_manifest("fit", common, args, {flags.series_file});
    auto series = load_series(flags.series_file);

    std::vector<double> pf;
    for (const auto& d : series.days)
        if (d.n() > 0) pf.push_back(d.pF());
    double h = flags.h;
    if (h <= 0) h = smooth::cv_bandwidth(pf, parse_h_grid(flags.h_grid)).h_star;

    auto smoothed = smooth::smooth_series(series, h);
    fs::path out = ensure_out_dir(common.out_dir);
    json trends = json::object();
    static const char* comp_keys[3] = {"F", "C", "U"};
    smooth::TrendFit fit_f;
    for (int c = 0; c < 3; ++c) {
        auto fit = smooth::polyfit_stepwise(smoothed, c, flags.d_max);
        trends[comp_keys[c]] = json::parse(fit.to_json());
        if (c == 0) fit_f = fit;
    }
    auto metrics = smooth::trend_metrics(smoothed, fit_f, 0);
    write_json_artifact(out / "trend.json", trends.dump(), manifest);
    write_json_artifact(out / "trend_metrics.json", smooth::trend_metrics_json(metrics), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "fit: selected degree " << fit_f.selected << " for F (h = " << h
              << "); amplitude " << format_double(metrics.smoothed_min) << " to "
              << format_double(metrics.smoothed_max) << ", decline "
              << format_double(metrics.decline) << "\n";
    return 0;
}

struct SimulateFlags {
    std::string config_file;
    std::string preset = "paper";
    std::string mode = "both";  // series | posts | both
};

sim::ScenarioConfig scenario_from_flags(const SimulateFlags& flags, std::uint64_t seed) {
    sim::ScenarioConfig cfg;
    if (!flags.config_file.empty()) {
        cfg = sim::ScenarioConfig::from_json(slurp(flags.config_file));
        if (seed != 0) cfg.seed = seed;
        return cfg;
    }
    if (flags.preset == "paper") {
        cfg = sim::ScenarioConfig::paper_shaped(seed);
    } else if (flags.preset == "null") {
        cfg.seed = seed;
        cfg.trajectory.kind = sim::PolarityTrajectory::Kind::Constant;
        cfg.trajectory.p_const = {0.700, 0.165, 0.136};
        cfg.text = sim::TextModel::default_markers();
    } else if (flags.preset == "change-point") {
        cfg.seed = seed;
        cfg.trajectory.kind = sim::PolarityTrajectory::Kind::ChangePoint;
        cfg.trajectory.change_day = 180;
        cfg.trajectory.p_before = {0.70, 0.165, 0.135};
        cfg.trajectory.p_after = {0.55, 0.2475, 0.2025};
        cfg.text = sim::TextModel::default_markers();
    } else {
        throw ContractViolation("simulate: unknown preset " + flags.preset);
    }
    return cfg;
}

int cmd_simulate(const CommonOpts& common, const SimulateFlags& flags,
                 const std::vector<std::string>& args) {
    std::vector<std::string> inputs;
    if (!flags.config_file.empty()) inputs.push_back(flags.config_file);
    auto manifest = make_manifest("simulate", common, args, inputs);
    auto cfg = scenario_from_flags(flags, common.seed);

    fs::path out = ensure_out_dir(common.out_dir);
    write_json_artifact(out / "scenario.json", cfg.to_json(), manifest);

    if (flags.mode == "series" || flags.mode == "both") {
        auto [series, ledger] = sim::simulate_series(cfg);
        write_csv_artifact(out / "series.csv", series_csv_string(series), manifest);
        write_json_artifact(out / "ledger.json", ledger.to_json(), manifest);
    }
    if (flags.mode == "posts" || flags.mode == "both") {
        std::ostringstream posts, labels;
        auto ledger = sim::simulate_posts(cfg, posts, labels);
        write_file_atomic(out / "posts.jsonl", posts.str());
        write_csv_artifact(out / "labels.csv", labels.str(), manifest);
        write_json_artifact(out / "posts_ledger.json", ledger.to_json(), manifest);
        std::cout << "simulate: " << ledger.unique_posts << " posts ("
                  << ledger.planted_duplicates << " planted duplicates)\n";
    }
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    return 0;
}

struct CalibrateFlags {
    std::string test = "basic";
    std::string config_file;
    int replicates = 200;
    int window = 15;
    std::size_t mc_reps = 100000;
    std::int64_t exact_bound = 1500;
    int threads = 0;
};

int cmd_calibrate(const CommonOpts& common, const CalibrateFlags& flags,
                  const std::vector<std::string>& args) {
    std::vector<std::string> inputs;
    if (!flags.config_file.empty()) inputs.push_back(flags.config_file);
    auto manifest = make_manifest("calibrate", common, args, inputs);

    sim::ScenarioConfig cfg;
    if (!flags.config_file.empty()) {
        cfg = sim::ScenarioConfig::from_json(slurp(flags.config_file));
    } else {
        cfg.trajectory.kind = sim::PolarityTrajectory::Kind::Constant;
        cfg.trajectory.p_const = {0.700, 0.165, 0.136};
    }
    cfg.seed = common.seed;

    sim::TestKind kind;
    if (flags.test == "basic")
        kind = sim::TestKind::Basic;
    else if (flags.test == "running")
        kind = sim::TestKind::Running;
    else if (flags.test == "variance")
        kind = sim::TestKind::RunningVariance;
    else
        throw ContractViolation("calibrate: unknown --test " + flags.test);

    distest::MultinomialTestConfig test_cfg{flags.exact_bound, flags.mc_reps, common.seed};
    auto result = sim::calibrate_type1(kind, cfg, flags.replicates, test_cfg, flags.window,
                                       flags.threads);

    fs::path out = ensure_out_dir(common.out_dir);
    write_json_artifact(out / "calibration.json", result.to_json(), manifest);
    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "calibrate " << flags.test << " (" << flags.replicates << " replicates):\n";
    for (const auto& lv : result.levels)
        std::cout << "  alpha " << lv.alpha << ": mean flagged fraction "
                  << format_double(lv.mean_fraction) << " [" << format_double(lv.ci_lower) << ", "
                  << format_double(lv.ci_upper) << "]\n";
    return 0;
}

struct ReportAllFlags {
    std::string config_file;
    std::size_t mc_reps = 20000;
    std::int64_t exact_bound = 1500;
    std::size_t boot_reps = 2000;
};

int cmd_report_all(const CommonOpts& common, const ReportAllFlags& flags,
                   const std::vector<std::string>& args) {
    std::vector<std::string> inputs;
    if (!flags.config_file.empty()) inputs.push_back(flags.config_file);
    auto manifest = make_manifest("report-all", common, args, inputs);

    sim::ScenarioConfig cfg = flags.config_file.empty()
                                  ? sim::ScenarioConfig::paper_shaped(common.seed)
                                  : sim::ScenarioConfig::from_json(slurp(flags.config_file));
    if (flags.config_file.empty()) cfg.seed = derive_seed(common.seed, 0x51Du);

    fs::path out = ensure_out_dir(common.out_dir);
    write_json_artifact(out / "scenario.json", cfg.to_json(), manifest);

    // 1. synthetic post stream with ground truth
    std::ostringstream posts_ss, labels_ss;
    auto ledger = sim::simulate_posts(cfg, posts_ss, labels_ss);
    write_file_atomic(out / "posts.jsonl", posts_ss.str());
    write_csv_artifact(out / "labels.csv", labels_ss.str(), manifest);

    // 2. ingest
    std::istringstream posts_in(posts_ss.str());
    auto corpus = ingest::ingest_jsonl_stream(posts_in, {});
    auto interactions = ingest::interaction_series(corpus);
    {
        std::ostringstream ss;
        ingest::write_interaction_csv(ss, interactions);
        write_csv_artifact(out / "interactions.csv", ss.str(), manifest);
    }
    std::int64_t max_day = 1;
    for (const auto& d : interactions) max_day = std::max(max_day, d.interactions);
    auto peaks = ingest::detect_peaks(interactions, static_cast<double>(max_day) * 0.15);

    // 3. train on a systematic sample of ground-truth labels, evaluate on the
    //    complementary sample (a Table-1 style report), classify everything
    std::unordered_map<std::string, classify::PolarityLabel> truth;
    for (const auto& [id, label] : ledger.post_labels) truth[id] = label;

    auto tokens = tokenize_corpus(corpus);
    std::vector<std::size_t> train_rows, eval_rows;
    for (std::size_t i = 0; i < corpus.posts.size(); ++i) {
        if (i % 10 == 0) train_rows.push_back(i);
        else if (i % 10 == 5) eval_rows.push_back(i);
    }
    std::vector<text::TokenList> train_docs;
    for (auto i : train_rows) train_docs.push_back(tokens[i]);
    auto vocab = text::build_vocabulary(train_docs, 2);

    std::vector<classify::LabeledPost> train_data;
    for (auto i : train_rows)
        train_data.push_back({corpus.posts[i].id, text::featurize(tokens[i], vocab),
                              truth.at(corpus.posts[i].id)});
    auto model = classify::train_svm(train_data, vocab.size(), {10, 1e-2},
                                     derive_seed(common.seed, 0x7261u));
    model.vocab_ref = hex64(fnv1a64(vocab.to_json()));
    write_json_artifact(out / "model.json", model.to_json(), manifest);
    write_json_artifact(out / "vocab.json", vocab.to_json(), manifest);

    std::vector<classify::PolarityLabel> eval_pred, eval_truth;
    for (auto i : eval_rows) {
        eval_pred.push_back(model.predict(text::featurize(tokens[i], vocab)));
        eval_truth.push_back(truth.at(corpus.posts[i].id));
    }
    auto eval_report = classify::evaluate(eval_pred, eval_truth);
    write_json_artifact(out / "eval.json", eval_report.to_json(), manifest);
    classify::print_eval_table(std::cout, eval_report);

    std::unordered_map<std::string, classify::PolarityLabel> predictions;
    {
        std::vector<std::pair<std::string, classify::PolarityLabel>> rows;
        rows.reserve(corpus.posts.size());
        for (std::size_t i = 0; i < corpus.posts.size(); ++i) {
            auto label = model.predict(text::featurize(tokens[i], vocab));
            predictions[corpus.posts[i].id] = label;
            rows.emplace_back(corpus.posts[i].id, label);
        }
        std::ostringstream ss;
        classify::write_labels_csv(ss, rows);
        write_csv_artifact(out / "predictions.csv", ss.str(), manifest);
    }

    // 4. polarity series and yearly summary
    auto series = polarity::aggregate(corpus, predictions);
    write_csv_artifact(out / "polarity.csv", series_csv_string(series), manifest);
    auto yearly = polarity::yearly_summary(series, flags.boot_reps,
                                           derive_seed(common.seed, 0xB007u));
    write_json_artifact(out / "yearly.json", yearly.to_json(), manifest);

    // 5. the three disorientation tests
    distest::MultinomialTestConfig test_cfg{flags.exact_bound, flags.mc_reps, common.seed};
    auto basic = distest::basic_test(series, yearly, test_cfg);
    auto running = distest::running_test(series, 15, test_cfg);
    auto variance = distest::running_variance_test(series, 15, yearly.var_pF);
    for (const auto& [stem, run] :
         {std::pair<std::string, const distest::TestRun*>{"basic", &basic},
          {"running", &running},
          {"variance", &variance}}) {
        std::ostringstream ss;
        distest::write_outcomes_csv(ss, *run);
        write_csv_artifact(out / ("outcomes_" + stem + ".csv"), ss.str(), manifest);
        write_json_artifact(out / ("summary_" + stem + ".json"), distest::summary_json(*run),
                            manifest);
    }

    // 6. smoothing and trend fit
    std::vector<double> pf;
    for (const auto& d : series.days)
        if (d.n() > 0) pf.push_back(d.pF());
    auto cv = smooth::cv_bandwidth(pf, smooth::log_spaced_grid(0.005, 0.5, 30));
    auto smoothed = smooth::smooth_series(series, cv.h_star);
    {
        std::ostringstream ss;
        smooth::write_smoothed_csv(ss, smoothed);
        write_csv_artifact(out / "smoothed.csv", ss.str(), manifest);
    }
    write_json_artifact(out / "smooth.json", smooth::smooth_meta_json(smoothed, &cv), manifest);

    smooth::TrendFit fits[3];
    json trends = json::object();
    static const char* comp_keys[3] = {"F", "C", "U"};
    for (int c = 0; c < 3; ++c) {
        fits[c] = smooth::polyfit_stepwise(smoothed, c, 4);
        trends[comp_keys[c]] = json::parse(fits[c].to_json());
    }
    write_json_artifact(out / "trend.json", trends.dump(), manifest);
    auto metrics = smooth::trend_metrics(smoothed, fits[0], 0);
    write_json_artifact(out / "trend_metrics.json", smooth::trend_metrics_json(metrics), manifest);

    // 7. figures
    FigureInputs fig;
    fig.interactions = &interactions;
    fig.peaks = &peaks;
    fig.smoothed = &smoothed;
    fig.basic = &basic;
    fig.running = &running;
    fig.variance = &variance;
    for (int c = 0; c < 3; ++c) fig.trend_fits[c] = &fits[c];
    for (const auto& [name, content] : emit_figures(fig))
        write_svg_artifact(out / name, content, manifest);

    write_file_atomic(out / "manifest.json", manifest.to_json() + "\n");
    std::cout << "report-all: outputs in " << out.string() << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"vaxpulse: polarity analytics for vaccine-related social posts"};
    app.require_subcommand(1);

    CommonOpts common;
    std::vector<std::string> raw_args(argv + 1, argv + argc);

    IngestFlags ingest_flags;
    auto* sc_ingest = app.add_subcommand("ingest", "load, deduplicate and summarize a JSONL post file");
    sc_ingest->add_option("--in", ingest_flags.in_file, "input JSONL file")->required();
    sc_ingest->add_option("--out", common.out_dir, "output directory")->required();
    sc_ingest->add_option("--window-start", ingest_flags.window_start, "study window start (YYYY-MM-DD)");
    sc_ingest->add_option("--window-end", ingest_flags.window_end, "study window end (YYYY-MM-DD)");
    sc_ingest->add_option("--lang", ingest_flags.lang, "required language code");
    sc_ingest->add_option("--min-prominence", ingest_flags.min_prominence,
                          "emit peaks.csv for peaks at least this prominent");

    TrainFlags train_flags;
    auto* sc_train = app.add_subcommand("train", "train the polarity classifier");
    sc_train->add_option("--in", train_flags.corpus_file, "corpus JSONL")->required();
    sc_train->add_option("--labels", train_flags.labels_file, "labels CSV")->required();
    sc_train->add_option("--out", common.out_dir)->required();
    sc_train->add_option("--algo", train_flags.algo, "svm | nb");
    sc_train->add_option("--min-count", train_flags.min_count, "vocabulary frequency threshold");
    sc_train->add_option("--epochs", train_flags.epochs);
    sc_train->add_option("--reg", train_flags.reg, "SVM regularization");
    sc_train->add_option("--nb-alpha", train_flags.nb_alpha, "naive Bayes smoothing");
    sc_train->add_option("--seed", common.seed);

    ClassifyFlags classify_flags;
    auto* sc_classify = app.add_subcommand("classify", "predict polarity labels for a corpus");
    sc_classify->add_option("--in", classify_flags.corpus_file)->required();
    sc_classify->add_option("--model", classify_flags.model_file)->required();
    sc_classify->add_option("--vocab", classify_flags.vocab_file)->required();
    sc_classify->add_option("--out", common.out_dir)->required();

    EvalFlags eval_flags;
    auto* sc_eval = app.add_subcommand("eval", "score predictions against reference labels");
    sc_eval->add_option("--pred", eval_flags.pred_file)->required();
    sc_eval->add_option("--truth", eval_flags.truth_file)->required();
    sc_eval->add_option("--out", common.out_dir)->required();

    AgreeFlags agree_flags;
    auto* sc_agree = app.add_subcommand("agree", "inter-annotator agreement statistics");
    sc_agree->add_option("--ratings", agree_flags.ratings_file, "item x category rating counts CSV");
    sc_agree->add_option("--correct", agree_flags.correct);
    sc_agree->add_option("--total", agree_flags.total);
    sc_agree->add_option("--level", agree_flags.level);
    sc_agree->add_option("--out", common.out_dir)->required();

    AggregateFlags agg_flags;
    auto* sc_agg = app.add_subcommand("aggregate", "daily polarity series and yearly summary");
    sc_agg->add_option("--in", agg_flags.corpus_file)->required();
    sc_agg->add_option("--pred", agg_flags.pred_file)->required();
    sc_agg->add_option("--out", common.out_dir)->required();
    sc_agg->add_option("--span-start", agg_flags.span_start);
    sc_agg->add_option("--span-end", agg_flags.span_end);
    sc_agg->add_option("--boot-reps", agg_flags.boot_reps);
    sc_agg->add_option("--seed", common.seed);

    TestFlags test_flags;
    auto add_test_opts = [&](CLI::App* sc, bool variance) {
        sc->add_option("--series", test_flags.series_file, "polarity series CSV")->required();
        sc->add_option("--out", common.out_dir)->required();
        sc->add_option("--alpha", test_flags.alpha_csv, "significance levels, comma separated");
        sc->add_option("--seed", common.seed);
        if (!variance) {
            sc->add_option("--mc-reps", test_flags.mc_reps);
            sc->add_option("--exact-bound", test_flags.exact_bound);
        }
    };
    auto* sc_basic = app.add_subcommand("test-basic", "daily multinomial test against the yearly null");
    add_test_opts(sc_basic, false);
    auto* sc_running = app.add_subcommand("test-running", "daily multinomial test against the trailing window");
    add_test_opts(sc_running, false);
    sc_running->add_option("--window", test_flags.window);
    sc_running->add_option("--w-grid", test_flags.w_grid_csv, "window sensitivity grid, e.g. 7,10,15,20,30");
    auto* sc_variance = app.add_subcommand("test-variance", "running variance chi-square test");
    add_test_opts(sc_variance, true);
    sc_variance->add_option("--window", test_flags.window);
    sc_variance->add_option("--sigma0", test_flags.sigma0, "null variance (default: yearly variance of daily pF)");

    SmoothFlags smooth_flags;
    auto* sc_smooth = app.add_subcommand("smooth", "beta-kernel smoothing of the polarity series");
    sc_smooth->add_option("--series", smooth_flags.series_file)->required();
    sc_smooth->add_option("--out", common.out_dir)->required();
    sc_smooth->add_option("--bandwidth", smooth_flags.h, "bandwidth; omit to cross-validate");
    sc_smooth->add_option("--h-grid", smooth_flags.h_grid, "lo,hi,n log-spaced CV grid");
    sc_smooth->add_flag("--count-weighted", smooth_flags.count_weighted,
                        "weight kernel by daily post counts");

    FitFlags fit_flags;
    auto* sc_fit = app.add_subcommand("fit", "stepwise polynomial trend of the smoothed series");
    sc_fit->add_option("--series", fit_flags.series_file)->required();
    sc_fit->add_option("--out", common.out_dir)->required();
    sc_fit->add_option("--bandwidth", fit_flags.h, "bandwidth; omit to cross-validate");
    sc_fit->add_option("--h-grid", fit_flags.h_grid);
    sc_fit->add_option("--dmax", fit_flags.d_max);

    SimulateFlags sim_flags;
    auto* sc_sim = app.add_subcommand("simulate", "generate a synthetic post stream with ground truth");
    sc_sim->add_option("--config", sim_flags.config_file, "scenario JSON");
    sc_sim->add_option("--preset", sim_flags.preset, "paper | null | change-point");
    sc_sim->add_option("--mode", sim_flags.mode, "series | posts | both");
    sc_sim->add_option("--out", common.out_dir)->required();
    sc_sim->add_option("--seed", common.seed);

    CalibrateFlags cal_flags;
    auto* sc_cal = app.add_subcommand("calibrate", "type-I calibration of a test on the null simulator");
    sc_cal->add_option("--test", cal_flags.test, "basic | running | variance")->required();
    sc_cal->add_option("--config", cal_flags.config_file, "null scenario JSON");
    sc_cal->add_option("--replicates", cal_flags.replicates);
    sc_cal->add_option("--window", cal_flags.window);
    sc_cal->add_option("--mc-reps", cal_flags.mc_reps);
    sc_cal->add_option("--exact-bound", cal_flags.exact_bound);
    sc_cal->add_option("--threads", cal_flags.threads);
    sc_cal->add_option("--out", common.out_dir)->required();
    sc_cal->add_option("--seed", common.seed);

    ReportAllFlags all_flags;
    auto* sc_all = app.add_subcommand("report-all", "full pipeline on a simulated scenario");
    sc_all->add_option("--config", all_flags.config_file, "scenario JSON (default: paper-shaped preset)");
    sc_all->add_option("--out", common.out_dir)->required();
    sc_all->add_option("--seed", common.seed);
    sc_all->add_option("--mc-reps", all_flags.mc_reps);
    sc_all->add_option("--exact-bound", all_flags.exact_bound);
    sc_all->add_option("--boot-reps", all_flags.boot_reps);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (sc_ingest->parsed()) return cmd_ingest(common, ingest_flags, raw_args);
        if (sc_train->parsed()) return cmd_train(common, train_flags, raw_args);
        if (sc_classify->parsed()) return cmd_classify(common, classify_flags, raw_args);
        if (sc_eval->parsed()) return cmd_eval(common, eval_flags, raw_args);
        if (sc_agree->parsed()) return cmd_agree(common, agree_flags, raw_args);
        if (sc_agg->parsed()) return cmd_aggregate(common, agg_flags, raw_args);
        if (sc_basic->parsed()) return cmd_test("basic", common, test_flags, raw_args);
        if (sc_running->parsed()) return cmd_test("running", common, test_flags, raw_args);
        if (sc_variance->parsed()) return cmd_test("variance", common, test_flags, raw_args);
        if (sc_smooth->parsed()) return cmd_smooth(common, smooth_flags, raw_args);
        if (sc_fit->parsed()) return cmd_fit(common, fit_flags, raw_args);
        if (sc_sim->parsed()) return cmd_simulate(common, sim_flags, raw_args);
        if (sc_cal->parsed()) return cmd_calibrate(common, cal_flags, raw_args);
        if (sc_all->parsed()) return cmd_report_all(common, all_flags, raw_args);
        std::cerr << app.help();
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace vaxpulse::report
