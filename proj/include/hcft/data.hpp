#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hcft/rng.hpp"

namespace hcft {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One patch. truth_label is evaluation-only and must never be read by any
// training path; mimic marks generator-planted hard negatives (evaluation-only
// as well).
struct InstanceRecord {
    std::string slide_id;
    std::size_t patch_index = 0;
    std::vector<double> raw;        // image surrogate, dimension D_raw
    std::vector<double> embedding;  // current encoder output, dimension D_emb
    int pseudo_label = -1;          // -1 = unassigned/presumed negative
    std::optional<int> truth_label;
    bool mimic = false;
};

// One slide: label 0 = non-tumor, larger index = greater severity.
struct Bag {
    std::string slide_id;
    int label = 0;
    std::vector<InstanceRecord> instances;
    Split split = Split::Train;
};

struct CohortSpec {
    int n_classes = 2;
    std::vector<int> bags_per_class;        // one count per class
    int bag_size_min = 50;
    int bag_size_max = 100;
    double positive_fraction_lo = 0.1;
    double positive_fraction_hi = 0.3;
    double mimic_fraction_lo = 0.1;
    double mimic_fraction_hi = 0.3;
    int d_raw = 32;
    double class_prototype_separation = 3.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
};

// Draws bags from Gaussian prototypes. Each positive class c has its own
// prototype plus a "mimic" prototype placed 0.35 of the way from the normal
// prototype towards it; mimic instances carry truth_label 0. Every label-Y bag
// (Y > 0) contains at least one truth-label-Y instance; label-0 bags contain
// only truth-label-0 instances. Raw values are quantized to f32 so the binary
// store round-trips bit-exactly.
std::vector<Bag> generate_cohort(const CohortSpec& spec);

// Stratified by bag label, deterministic per seed. ratios are
// {train, val, test} and must sum to 1.
void split_cohort(std::vector<Bag>& bags, const std::vector<double>& ratios, std::uint64_t seed);

// Persistence. `stem` names a file family:
//   <stem>.raw.bin   binary f32 store, magic HCFTEMB1
//   <stem>.emb.bin   same container for embeddings (written if present)
//   <stem>.manifest.tsv  slide_id \t bag_label \t split \t first_index \t count
//   <stem>.truth.i32 optional truth labels (-1 = unknown), plus mimic flags
void save_cohort(const std::vector<Bag>& bags, const std::string& stem);
std::vector<Bag> load_cohort(const std::string& stem);

// Low-level container used for embeddings and model checkpoints alike.
void write_f32_store(const std::string& path, const char magic[8], std::size_t dim,
                     const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_f32_store(const std::string& path, const char magic[8],
                                                std::size_t* dim_out);

std::size_t total_instances(const std::vector<Bag>& bags);

}  // namespace hcft
