#include "hcft/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcft/errors.hpp"

namespace hcft {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw DataError("unknown split name: " + name);
}

std::size_t total_instances(const std::vector<Bag>& bags) {
    std::size_t n = 0;
    for (const auto& b : bags) n += b.instances.size();
    return n;
}

namespace {

double f32_quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> sample_point(const std::vector<double>& proto, double sigma, Rng& rng) {
    std::vector<double> v(proto.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f32_quantize(proto[i] + sigma * rng.normal());
    return v;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

std::vector<Bag> generate_cohort(const CohortSpec& spec) {
    if (spec.n_classes < 2) throw DataError("generate_cohort: n_classes must be >= 2");
    if (static_cast<int>(spec.bags_per_class.size()) != spec.n_classes)
        throw DataError("generate_cohort: bags_per_class must have one entry per class");
    if (spec.bag_size_min < 1 || spec.bag_size_max < spec.bag_size_min)
        throw DataError("generate_cohort: empty bag size range");
    if (spec.positive_fraction_hi < spec.positive_fraction_lo ||
        spec.mimic_fraction_hi < spec.mimic_fraction_lo)
        throw DataError("generate_cohort: empty fraction range");
    if (spec.positive_fraction_lo * spec.bag_size_min < 1.0)
        throw DataError("generate_cohort: positive fraction times min bag size is below 1");

    Rng rng(spec.seed);
    const int d = spec.d_raw;
    const int n = spec.n_classes;

    // Prototypes: normal at the origin, one per positive class at the given
    // separation, one mimic prototype 0.35 of the way towards each positive
    // class plus orthogonal jitter.
    std::vector<double> normal_proto(d, 0.0);
    std::vector<std::vector<double>> pos_proto(n), mimic_proto(n);
    for (int c = 1; c < n; ++c) {
        std::vector<double> u(d);
        double norm = 0.0;
        for (auto& x : u) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        pos_proto[c].resize(d);
        for (int i = 0; i < d; ++i) pos_proto[c][i] = spec.class_prototype_separation * u[i] / norm;

        std::vector<double> jitter(d);
        double dot = 0.0;
        for (int i = 0; i < d; ++i) {
            jitter[i] = rng.normal();
            dot += jitter[i] * u[i] / norm;
        }
        double jnorm = 0.0;
        for (int i = 0; i < d; ++i) {
            jitter[i] -= dot * u[i] / norm;  // project out the class direction
            jnorm += jitter[i] * jitter[i];
        }
        jnorm = std::sqrt(std::max(jnorm, 1e-12));
        mimic_proto[c].resize(d);
        for (int i = 0; i < d; ++i)
            mimic_proto[c][i] =
                0.35 * pos_proto[c][i] + 0.1 * spec.class_prototype_separation * jitter[i] / jnorm;
    }

    std::vector<Bag> bags;
    std::vector<double> mimic_dist_sum(n, 0.0), normal_dist_sum(n, 0.0);
    std::vector<std::size_t> mimic_cnt(n, 0), normal_cnt(n, 0);
    int slide_seq = 0;
    for (int y = 0; y < n; ++y) {
        for (int b = 0; b < spec.bags_per_class[y]; ++b) {
            Bag bag;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "slide_%04d_y%d", slide_seq++, y);
            bag.slide_id = buf;
            bag.label = y;
            int size = spec.bag_size_min +
                       static_cast<int>(rng.below(
                           static_cast<std::uint64_t>(spec.bag_size_max - spec.bag_size_min + 1)));
            int n_pos = 0;
            if (y > 0) {
                double f = rng.uniform(spec.positive_fraction_lo, spec.positive_fraction_hi);
                n_pos = std::max(1, static_cast<int>(std::lround(f * size)));
                n_pos = std::min(n_pos, size);
            }
            int n_neg = size - n_pos;
            double g = rng.uniform(spec.mimic_fraction_lo, spec.mimic_fraction_hi);
            int n_mimic = std::min(n_neg, static_cast<int>(std::lround(g * n_neg)));

            for (int k = 0; k < size; ++k) {
                InstanceRecord rec;
                rec.slide_id = bag.slide_id;
                rec.patch_index = static_cast<std::size_t>(k);
                if (k < n_pos) {
                    rec.raw = sample_point(pos_proto[y], spec.noise_sigma, rng);
                    rec.truth_label = y;
                } else if (k < n_pos + n_mimic) {
                    int target = (n == 2) ? 1 : 1 + static_cast<int>(rng.below(n - 1));
                    rec.raw = sample_point(mimic_proto[target], spec.noise_sigma, rng);
                    rec.truth_label = 0;
                    rec.mimic = true;
                    mimic_dist_sum[target] += dist(rec.raw, pos_proto[target]);
                    ++mimic_cnt[target];
                } else {
                    rec.raw = sample_point(normal_proto, spec.noise_sigma, rng);
                    rec.truth_label = 0;
                    for (int c = 1; c < n; ++c) normal_dist_sum[c] += dist(rec.raw, pos_proto[c]);
                    ++normal_cnt[0];
                }
                bag.instances.push_back(std::move(rec));
            }
            // Positives first then negatives would leak label structure into
            // patch order; shuffle and renumber.
            rng.shuffle(bag.instances);
            for (std::size_t k = 0; k < bag.instances.size(); ++k) bag.instances[k].patch_index = k;
            bags.push_back(std::move(bag));
        }
    }

    // Generation-time audit: mimics really are closer to their target positive
    // prototypes than pure normals are, on average.
    for (int c = 1; c < n; ++c) {
        if (mimic_cnt[c] == 0 || normal_cnt[0] == 0) continue;
        if (!(mimic_dist_sum[c] / mimic_cnt[c] < normal_dist_sum[c] / normal_cnt[0]))
            throw DataError("generate_cohort: mimic placement audit failed for class " +
                            std::to_string(c));
    }
    return bags;
}

void split_cohort(std::vector<Bag>& bags, const std::vector<double>& ratios, std::uint64_t seed) {
    if (ratios.size() != 3) throw ConfigError("split_cohort: need {train, val, test} ratios");
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_cohort: ratios must sum to 1");
    int parts = 0;
    for (double r : ratios)
        if (r > 0.0) ++parts;

    std::vector<std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < bags.size(); ++i) {
        int y = bags[i].label;
        if (static_cast<std::size_t>(y) >= by_label.size()) by_label.resize(y + 1);
        by_label[y].push_back(i);
    }
    Rng rng(seed);
    for (std::size_t y = 0; y < by_label.size(); ++y) {
        auto& group = by_label[y];
        if (group.empty()) continue;
        if (static_cast<int>(group.size()) < parts)
            throw DataError("split_cohort: class " + std::to_string(y) + " has " +
                            std::to_string(group.size()) + " bags for " + std::to_string(parts) +
                            " split parts");
        Rng grp = rng.split(y);
        grp.shuffle(group);
        std::size_t n = group.size();
        std::size_t n_train = static_cast<std::size_t>(std::floor(ratios[0] * n));
        std::size_t n_val = static_cast<std::size_t>(std::floor(ratios[1] * n));
        std::size_t n_test = static_cast<std::size_t>(std::floor(ratios[2] * n));
        // largest-remainder distribution of the leftovers, train first
        std::size_t assigned = n_train + n_val + n_test;
        const Split order[3] = {Split::Train, Split::Val, Split::Test};
        std::size_t counts[3] = {n_train, n_val, n_test};
        for (int s = 0; assigned < n; s = (s + 1) % 3) {
            if (ratios[s] > 0.0) {
                ++counts[s];
                ++assigned;
            }
        }
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t k = 0; k < counts[s]; ++k) bags[group[pos++]].split = order[s];
    }
}

void write_f32_store(const std::string& path, const char magic[8], std::size_t dim,
                     const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(magic, 8);
    std::uint32_t version = 1, d32 = static_cast<std::uint32_t>(dim);
    std::uint64_t count = rows.size();
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&d32), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    std::vector<float> buf(dim);
    for (const auto& row : rows) {
        if (row.size() != dim) throw DimensionError("write_f32_store: ragged row");
        for (std::size_t i = 0; i < dim; ++i) buf[i] = static_cast<float>(row[i]);
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(4 * dim));
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<std::vector<double>> read_f32_store(const std::string& path, const char magic[8],
                                                std::size_t* dim_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for read: " + path);
    char got[8];
    in.read(got, 8);
    if (in.gcount() != 8 || std::memcmp(got, magic, 8) != 0)
        throw FormatError("bad magic in " + path, 0);
    std::uint32_t version = 0, d32 = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (in.gcount() != 4 || version != 1) throw FormatError("bad version in " + path, 8);
    in.read(reinterpret_cast<char*>(&d32), 4);
    if (in.gcount() != 4) throw FormatError("truncated header in " + path, 12);
    in.read(reinterpret_cast<char*>(&count), 8);
    if (in.gcount() != 8) throw FormatError("truncated header in " + path, 16);

    std::vector<std::vector<double>> rows(count);
    std::vector<float> buf(d32);
    for (std::uint64_t r = 0; r < count; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(4) * d32);
        if (in.gcount() != static_cast<std::streamsize>(4) * d32)
            throw FormatError("truncated payload in " + path,
                              24 + static_cast<std::size_t>(r) * 4 * d32 +
                                  static_cast<std::size_t>(in.gcount()));
        rows[r].resize(d32);
        for (std::uint32_t i = 0; i < d32; ++i) rows[r][i] = static_cast<double>(buf[i]);
    }
    if (dim_out) *dim_out = d32;
    return rows;
}

namespace {

const char kEmbMagic[8] = {'H', 'C', 'F', 'T', 'E', 'M', 'B', '1'};

void write_i32_array(const std::string& path, const std::vector<std::int32_t>& vals) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(4 * vals.size()));
}

std::vector<std::int32_t> read_i32_array(const std::string& path, std::size_t expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for read: " + path);
    std::vector<std::int32_t> vals(expect);
    in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(4 * expect));
    if (in.gcount() != static_cast<std::streamsize>(4 * expect))
        throw FormatError("truncated i32 file " + path, static_cast<std::size_t>(in.gcount()));
    return vals;
}

}  // namespace

void save_cohort(const std::vector<Bag>& bags, const std::string& stem) {
    if (bags.empty()) throw DataError("save_cohort: empty cohort");
    std::size_t d_raw = bags[0].instances.at(0).raw.size();
    bool have_emb = !bags[0].instances[0].embedding.empty();
    std::size_t d_emb = have_emb ? bags[0].instances[0].embedding.size() : 0;

    std::vector<std::vector<double>> raw_rows, emb_rows;
    std::vector<std::int32_t> truth, mimic;
    std::ostringstream manifest;
    std::size_t first = 0;
    for (const auto& bag : bags) {
        manifest << bag.slide_id << '\t' << bag.label << '\t' << split_name(bag.split) << '\t'
                 << first << '\t' << bag.instances.size() << '\n';
        for (const auto& rec : bag.instances) {
            raw_rows.push_back(rec.raw);
            if (have_emb) emb_rows.push_back(rec.embedding);
            truth.push_back(rec.truth_label ? *rec.truth_label : -1);
            mimic.push_back(rec.mimic ? 1 : 0);
        }
        first += bag.instances.size();
    }
    write_f32_store(stem + ".raw.bin", kEmbMagic, d_raw, raw_rows);
    if (have_emb) write_f32_store(stem + ".emb.bin", kEmbMagic, d_emb, emb_rows);
    {
        std::ofstream out(stem + ".manifest.tsv");
        if (!out) throw DataError("cannot open for write: " + stem + ".manifest.tsv");
        out << manifest.str();
    }
    write_i32_array(stem + ".truth.i32", truth);
    write_i32_array(stem + ".mimic.i32", mimic);
}

std::vector<Bag> load_cohort(const std::string& stem) {
    std::size_t d_raw = 0;
    auto raw_rows = read_f32_store(stem + ".raw.bin", kEmbMagic, &d_raw);
    std::vector<std::vector<double>> emb_rows;
    if (std::filesystem::exists(stem + ".emb.bin")) {
        std::size_t d_emb = 0;
        emb_rows = read_f32_store(stem + ".emb.bin", kEmbMagic, &d_emb);
        if (emb_rows.size() != raw_rows.size())
            throw DataError("load_cohort: embedding count does not match raw count");
    }
    std::vector<std::int32_t> truth, mimic;
    if (std::filesystem::exists(stem + ".truth.i32"))
        truth = read_i32_array(stem + ".truth.i32", raw_rows.size());
    if (std::filesystem::exists(stem + ".mimic.i32"))
        mimic = read_i32_array(stem + ".mimic.i32", raw_rows.size());

    std::ifstream man(stem + ".manifest.tsv");
    if (!man) throw DataError("cannot open for read: " + stem + ".manifest.tsv");
    std::vector<Bag> bags;
    std::string line;
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Bag bag;
        std::string split_str;
        std::size_t first = 0, count = 0;
        if (!std::getline(ss, bag.slide_id, '\t')) throw DataError("bad manifest line: " + line);
        std::string field;
        std::getline(ss, field, '\t');
        bag.label = std::stoi(field);
        std::getline(ss, split_str, '\t');
        bag.split = split_from_name(split_str);
        std::getline(ss, field, '\t');
        first = static_cast<std::size_t>(std::stoull(field));
        std::getline(ss, field, '\t');
        count = static_cast<std::size_t>(std::stoull(field));
        if (first + count > raw_rows.size())
            throw DataError("manifest range exceeds store size for " + bag.slide_id);
        for (std::size_t k = 0; k < count; ++k) {
            InstanceRecord rec;
            rec.slide_id = bag.slide_id;
            rec.patch_index = k;
            rec.raw = raw_rows[first + k];
            if (!emb_rows.empty()) rec.embedding = emb_rows[first + k];
            if (!truth.empty() && truth[first + k] >= 0) rec.truth_label = truth[first + k];
            if (!mimic.empty()) rec.mimic = mimic[first + k] != 0;
            bag.instances.push_back(std::move(rec));
        }
        if (bag.instances.empty()) throw DataError("empty bag in manifest: " + bag.slide_id);
        bags.push_back(std::move(bag));
    }
    if (bags.empty()) throw DataError("load_cohort: empty manifest");
    return bags;
}

}  // namespace hcft
