#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hcft/data.hpp"
#include "hcft/encoder.hpp"
#include "hcft/metrics.hpp"
#include "hcft/mil.hpp"

namespace hcft {

struct RunConfig {
    int n_classes = 2;
    int k0 = 10;          // confidence top-K base
    int n_clusters = 5;   // C
    double theta = 0.5;
    int iterations = 3;   // T refinement rounds
    int round_patience = 2;

    int d_emb = 16;
    int d_att = 8;
    int d_hid = 16;

    TrainHyper mil;
    EncoderHyper encoder;

    std::uint64_t seed = 0;
    bool warm_start_mil = false;  // reuse previous round's MIL weights
    bool reset_encoder = false;   // restart fine-tuning from fresh weights each round

    std::string out_dir = "runs/default";

    // key = value serialization; every key is settable from a config file or
    // the CLI.
    std::map<std::string, std::string> to_map() const;
    void apply(const std::string& key, const std::string& value);
    static RunConfig from_file(const std::string& path);
    void echo(const std::string& path) const;
};

struct RoundReport {
    int round = 0;
    // metric -> value, insertion-ordered for stable report files
    std::vector<std::pair<std::string, double>> metrics;

    double get(const std::string& name) const;
    void put(const std::string& name, double value);
    void write_csv(const std::string& path) const;
};

struct RunResult {
    std::vector<RoundReport> reports;
    EncoderModel encoder;
    MILModel mil;
};

// The full iterative loop over an in-memory cohort. Bags must carry raw
// vectors; embeddings are (re)extracted internally. Writes per-round artifacts
// under config.out_dir when write_outputs is true.
RunResult run_pipeline(const RunConfig& config, std::vector<Bag> bags, bool write_outputs = true,
                       bool resume = false);

struct SweepRow {
    int k0;
    int n_clusters;
    bool ok;
    std::string error;
    RoundReport final_report;
};

std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<int>& k0_grid,
                            const std::vector<int>& c_grid, const std::vector<Bag>& bags);

// Round-0 style evaluation helpers, shared between the pipeline and the CLI.
RoundReport evaluate_round(const RunConfig& config, const std::vector<Bag>& bags,
                           const MILModel& mil, const EncoderModel& encoder, int round);

std::string format_double(double v);

}  // namespace hcft
