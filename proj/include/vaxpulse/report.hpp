#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vaxpulse/common.hpp"
#include "vaxpulse/distest.hpp"
#include "vaxpulse/ingest.hpp"
#include "vaxpulse/smoothfit.hpp"

namespace vaxpulse::report {

// Provenance record written next to every batch of outputs. The hash covers
// the subcommand, tool version, seed, normalized arguments and input file
// digests; the creation timestamp is deliberately outside the hash so reruns
// of the same configuration produce byte-identical artifacts.
struct RunManifest {
    std::string subcommand;
    std::string version;
    std::uint64_t seed = 0;
    std::vector<std::string> args;
    std::vector<std::pair<std::string, std::string>> inputs;  // path -> digest
    std::string hash;
    std::string created_utc;

    void finalize();  // computes hash
    std::string to_json() const;
};

// write-temp-rename; never leaves a partial file behind
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

void write_csv_artifact(const std::filesystem::path& path, const std::string& payload,
                        const RunManifest& manifest);
void write_json_artifact(const std::filesystem::path& path, const std::string& payload,
                         const RunManifest& manifest);
void write_svg_artifact(const std::filesystem::path& path, const std::string& payload,
                        const RunManifest& manifest);

struct FigureInputs {
    const ingest::InteractionSeries* interactions = nullptr;
    const std::vector<ingest::Peak>* peaks = nullptr;
    const smooth::SmoothedSeries* smoothed = nullptr;
    const distest::TestRun* basic = nullptr;
    const distest::TestRun* running = nullptr;
    const distest::TestRun* variance = nullptr;
    const smooth::TrendFit* trend_fits[3] = {nullptr, nullptr, nullptr};
};

// Renders whichever figures have their inputs present; asking for a figure
// with a missing input names the subcommand that produces it.
std::map<std::string, std::string> emit_figures(const FigureInputs& inputs);

// CLI entry point. Exit codes: 0 success, 1 contract violation or usage
// error, 2 I/O error.
int run(int argc, const char* const* argv);

}  // namespace vaxpulse::report
