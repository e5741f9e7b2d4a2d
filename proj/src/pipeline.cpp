#include "hcft/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcft/cluster.hpp"
#include "hcft/confidence.hpp"
#include "hcft/errors.hpp"
#include "hcft/refine.hpp"

namespace fs = std::filesystem;

namespace hcft {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["n_classes"] = std::to_string(n_classes);
    m["k0"] = std::to_string(k0);
    m["clusters"] = std::to_string(n_clusters);
    m["theta"] = format_double(theta);
    m["iterations"] = std::to_string(iterations);
    m["round_patience"] = std::to_string(round_patience);
    m["d_emb"] = std::to_string(d_emb);
    m["d_att"] = std::to_string(d_att);
    m["d_hid"] = std::to_string(d_hid);
    m["mil_lr_init"] = format_double(mil.lr_init);
    m["mil_lr_min"] = format_double(mil.lr_min);
    m["mil_epochs"] = std::to_string(mil.max_epochs);
    m["mil_patience"] = std::to_string(mil.patience);
    m["enc_lr"] = format_double(encoder.lr);
    m["enc_batch"] = std::to_string(encoder.batch_size);
    m["enc_epochs"] = std::to_string(encoder.max_epochs);
    m["enc_patience"] = std::to_string(encoder.patience);
    m["seed"] = std::to_string(seed);
    m["warm_start_mil"] = warm_start_mil ? "1" : "0";
    m["reset_encoder"] = reset_encoder ? "1" : "0";
    m["out_dir"] = out_dir;
    return m;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    try {
        if (key == "n_classes") n_classes = std::stoi(value);
        else if (key == "k0") k0 = std::stoi(value);
        else if (key == "clusters") n_clusters = std::stoi(value);
        else if (key == "theta") theta = std::stod(value);
        else if (key == "iterations") iterations = std::stoi(value);
        else if (key == "round_patience") round_patience = std::stoi(value);
        else if (key == "d_emb") d_emb = std::stoi(value);
        else if (key == "d_att") d_att = std::stoi(value);
        else if (key == "d_hid") d_hid = std::stoi(value);
        else if (key == "mil_lr_init") mil.lr_init = std::stod(value);
        else if (key == "mil_lr_min") mil.lr_min = std::stod(value);
        else if (key == "mil_epochs") mil.max_epochs = std::stoi(value);
        else if (key == "mil_patience") mil.patience = std::stoi(value);
        else if (key == "enc_lr") encoder.lr = std::stod(value);
        else if (key == "enc_batch") encoder.batch_size = std::stoi(value);
        else if (key == "enc_epochs") encoder.max_epochs = std::stoi(value);
        else if (key == "enc_patience") encoder.patience = std::stoi(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "warm_start_mil") warm_start_mil = value == "1" || value == "true";
        else if (key == "reset_encoder") reset_encoder = value == "1" || value == "true";
        else if (key == "out_dir") out_dir = value;
        else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value for " + key + ": " + value);
    }
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t eq = line.find('=');
        auto trim = [](std::string s) {
            std::size_t a = s.find_first_not_of(" \t\r");
            std::size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::echo(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for write: " + path);
    for (const auto& [k, v] : to_map()) out << k << " = " << v << "\n";
}

double RoundReport::get(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw DataError("report has no metric named " + name);
}

void RoundReport::put(const std::string& name, double value) { metrics.emplace_back(name, value); }

void RoundReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for write: " + path);
    out << "metric,value\n";
    out << "round," << round << "\n";
    for (const auto& [k, v] : metrics) out << k << "," << format_double(v) << "\n";
}

namespace {

std::uint64_t stage_seed(std::uint64_t base, int round, std::uint64_t stage) {
    Rng r(base);
    return r.split(static_cast<std::uint64_t>(round) * 97 + stage).next_u64();
}

std::vector<std::size_t> bags_with_split(const std::vector<Bag>& bags, Split s) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bags.size(); ++i)
        if (bags[i].split == s) out.push_back(i);
    return out;
}

std::vector<const Bag*> bag_ptrs(const std::vector<Bag>& bags,
                                 const std::vector<std::size_t>& idx) {
    std::vector<const Bag*> out;
    for (std::size_t i : idx) out.push_back(&bags[i]);
    return out;
}

void bag_metrics(const RunConfig& cfg, const std::vector<Bag>& bags,
                 const std::vector<std::size_t>& idx, const MILModel& mil,
                 const std::string& prefix, RoundReport& rep) {
    std::vector<int> pred, truth;
    Matrix probs(idx.size(), static_cast<std::size_t>(cfg.n_classes));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        BagForward f = bag_forward(mil, bags[idx[i]]);
        Matrix logits(1, f.bag_logits.size());
        logits.data = f.bag_logits;
        Matrix p = softmax_rows(logits);
        for (int c = 0; c < cfg.n_classes; ++c) probs(i, c) = p(0, c);
        pred.push_back(f.prediction);
        truth.push_back(bags[idx[i]].label);
    }
    auto cm = classification_metrics(pred, truth, cfg.n_classes);
    rep.put(prefix + "_bag_acc", cm.acc);
    rep.put(prefix + "_bag_f1", cm.macro_f1);
    rep.put(prefix + "_bag_auc", auc_ovr(probs, truth, cfg.n_classes));
}

void patch_metrics(const RunConfig& cfg, const std::vector<Bag>& bags,
                   const std::vector<std::size_t>& idx, const MILModel& mil,
                   const EncoderModel& enc, RoundReport& rep) {
    std::vector<int> pred, truth;
    std::vector<double> patch_score, mil_score;
    std::vector<char> tumor;
    std::vector<std::string> slides;
    for (std::size_t bi : idx) {
        const Bag& bag = bags[bi];
        BagForward f = bag_forward(mil, bag);
        double n_inst = static_cast<double>(bag.instances.size());
        for (std::size_t k = 0; k < bag.instances.size(); ++k) {
            const auto& rec = bag.instances[k];
            if (!rec.truth_label) continue;
            std::vector<double> p = patch_predict(enc, rec.raw);
            int arg = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            // hard-negative classes collapse to the normal class
            pred.push_back(arg >= cfg.n_classes ? 0 : arg);
            truth.push_back(*rec.truth_label);
            patch_score.push_back(patch_tumor_score(enc, rec.raw, cfg.n_classes));
            double pos_prob = 0.0;
            for (int c = 1; c < cfg.n_classes; ++c) pos_prob += f.instance_probs(k, c);
            mil_score.push_back(f.attention[k] * n_inst * pos_prob);
            tumor.push_back(*rec.truth_label > 0 ? 1 : 0);
            slides.push_back(bag.slide_id);
        }
    }
    if (pred.empty()) return;
    auto cm = classification_metrics(pred, truth, cfg.n_classes);
    rep.put("patch_acc", cm.acc);
    rep.put("patch_f1", cm.macro_f1);
    bool any_tumor = std::any_of(tumor.begin(), tumor.end(), [](char t) { return t != 0; });
    if (any_tumor) {
        rep.put("cpm_patch", cpm(froc(patch_score, tumor, slides)));
        rep.put("cpm_mil", cpm(froc(mil_score, tumor, slides)));
    }
}

void write_dstar_csv(const std::string& path, const std::vector<Bag>& bags,
                     const RefinementResult& refinement, const PatchDataset& ds, int n_classes) {
    // source attribution per entry
    std::map<std::pair<std::size_t, std::size_t>, std::string> source;
    for (const auto& li : refinement.cleaned_high)
        source[{li.ref.bag_index, li.ref.patch_index}] = "pos";
    for (const auto& mn : refinement.middle_low)
        source[{mn.ref.bag_index, mn.ref.patch_index}] = "hardneg_from_Tl";
    for (const auto& mn : refinement.middle_high)
        source[{mn.ref.bag_index, mn.ref.patch_index}] = "hardneg_from_Th";
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for write: " + path);
    out << "slide_id,patch_index,label,source\n";
    (void)n_classes;
    for (const auto& e : ds.entries) {
        const auto& rec = bags[e.ref.bag_index].instances[e.ref.patch_index];
        out << rec.slide_id << "," << rec.patch_index << "," << e.label << ","
            << source[{e.ref.bag_index, e.ref.patch_index}] << "\n";
    }
}

}  // namespace

RoundReport evaluate_round(const RunConfig& cfg, const std::vector<Bag>& bags,
                           const MILModel& mil, const EncoderModel& enc, int round) {
    RoundReport rep;
    rep.round = round;
    auto val_idx = bags_with_split(bags, Split::Val);
    auto test_idx = bags_with_split(bags, Split::Test);
    if (!val_idx.empty()) bag_metrics(cfg, bags, val_idx, mil, "val", rep);
    if (!test_idx.empty()) {
        bag_metrics(cfg, bags, test_idx, mil, "test", rep);
        patch_metrics(cfg, bags, test_idx, mil, enc, rep);
    }
    return rep;
}

RunResult run_pipeline(const RunConfig& cfg, std::vector<Bag> bags, bool write_outputs,
                       bool resume) {
    if (bags.empty()) throw DataError("run_pipeline: empty cohort");
    auto train_idx = bags_with_split(bags, Split::Train);
    auto val_idx = bags_with_split(bags, Split::Val);
    if (train_idx.empty() || val_idx.empty())
        throw DataError("run_pipeline: need nonempty train and val splits");
    std::size_t d_raw = bags[0].instances[0].raw.size();
    int n_patch_classes = 2 * cfg.n_classes - 1;

    if (write_outputs) {
        fs::create_directories(cfg.out_dir);
        RunConfig echo_cfg = cfg;
        echo_cfg.echo(cfg.out_dir + "/config.echo");
    }

    RunResult result;
    Rng init_rng(stage_seed(cfg.seed, -1, 0));
    result.encoder = EncoderModel::init(d_raw, static_cast<std::size_t>(cfg.d_emb),
                                        static_cast<std::size_t>(n_patch_classes), init_rng);

    int start_round = 0;
    double best_val_auc = -1.0;
    int rounds_since_best = 0;

    if (resume) {
        // pick up after the last fully-written round
        for (int r = 0; r <= cfg.iterations; ++r) {
            std::string dir = cfg.out_dir + "/round_" + std::to_string(r);
            if (fs::exists(dir + "/report.csv") && fs::exists(dir + "/mil.ckpt") &&
                fs::exists(dir + "/encoder.ckpt"))
                start_round = r + 1;
            else
                break;
        }
        if (start_round > 0) {
            std::string last = cfg.out_dir + "/round_" + std::to_string(start_round - 1);
            result.encoder = EncoderModel::load(last + "/encoder.ckpt");
            result.mil = MILModel::load(last + "/mil.ckpt");
            // rebuild patience state from the existing reports
            for (int r = 0; r < start_round; ++r) {
                std::ifstream in(cfg.out_dir + "/round_" + std::to_string(r) + "/report.csv");
                std::string line;
                double val_auc = -1.0;
                while (std::getline(in, line)) {
                    if (line.rfind("val_bag_auc,", 0) == 0)
                        val_auc = std::stod(line.substr(line.find(',') + 1));
                }
                if (val_auc > best_val_auc) {
                    best_val_auc = val_auc;
                    rounds_since_best = 0;
                } else {
                    ++rounds_since_best;
                }
            }
        }
    }
    reextract(result.encoder, bags);

    for (int round = start_round; round <= cfg.iterations; ++round) {
        std::string round_dir = cfg.out_dir + "/round_" + std::to_string(round);
        auto t_start = std::chrono::steady_clock::now();
        RoundReport rep;

        if (round > 0) {
            // refinement driven by the previous round's MIL model
            int t = round - 1;
            PseudoInit init = init_pseudo_labels(result.mil, bags, train_idx, t, cfg.k0);

            Matrix high_pts(init.sets.high.size(), static_cast<std::size_t>(cfg.d_emb));
            std::vector<int> high_labels(init.sets.high.size());
            for (std::size_t i = 0; i < init.sets.high.size(); ++i) {
                const auto& ref = init.sets.high[i].ref;
                const auto& emb = bags[ref.bag_index].instances[ref.patch_index].embedding;
                std::copy(emb.begin(), emb.end(), high_pts.data.begin() + i * emb.size());
                high_labels[i] = init.sets.high[i].label;
            }
            std::size_t k1 = std::min<std::size_t>(cfg.n_clusters, high_pts.rows);
            ClusterModel first = kmeans(high_pts, k1, stage_seed(cfg.seed, round, 1));
            ClassClusterSets L = classify_all_classes(first, high_labels, cfg.n_classes, cfg.theta);
            auto mined = mine_potential_negatives(bags, init.sets.low, L, first, cfg.n_classes);
            RefinementResult refined =
                refine_labels(bags, init.sets.high, mined, cfg.n_classes, cfg.n_clusters,
                              cfg.theta, stage_seed(cfg.seed, round, 2));
            PatchDataset dstar =
                build_patch_dataset(bags, refined.cleaned_high, refined.final_negatives,
                                    cfg.n_classes);
            // severity-rule audit: positives must never exceed their bag label
            for (const auto& e : dstar.entries) {
                if (e.label < cfg.n_classes && e.label > bags[e.ref.bag_index].label)
                    throw DataError("severity audit failed: positive pseudo label exceeds bag label");
            }

            rep.put("th_initial", static_cast<double>(init.sets.high.size()));
            rep.put("n_original", static_cast<double>(mined.size()));
            rep.put("n_final", static_cast<double>(refined.final_negatives.size()));
            rep.put("th_cleaned", static_cast<double>(refined.cleaned_high.size()));
            rep.put("dstar_size", static_cast<double>(dstar.entries.size()));
            for (int c = 0; c < dstar.n_classes; ++c)
                rep.put("dstar_class_" + std::to_string(c),
                        static_cast<double>(dstar.histogram[c]));

            if (cfg.reset_encoder) {
                Rng er(stage_seed(cfg.seed, round, 3));
                result.encoder = EncoderModel::init(d_raw, static_cast<std::size_t>(cfg.d_emb),
                                                    static_cast<std::size_t>(n_patch_classes), er);
            }
            train_encoder(result.encoder, bags, dstar, cfg.encoder,
                          stage_seed(cfg.seed, round, 4));
            reextract(result.encoder, bags);

            if (write_outputs) {
                fs::create_directories(round_dir);
                write_dstar_csv(round_dir + "/dstar.csv", bags, refined, dstar, cfg.n_classes);
            }
        }

        // (re)train the MIL aggregator on the current embeddings
        if (round == 0 || !cfg.warm_start_mil) {
            Rng mr(stage_seed(cfg.seed, round, 5));
            result.mil = MILModel::init(static_cast<std::size_t>(cfg.d_emb),
                                        static_cast<std::size_t>(cfg.d_att),
                                        static_cast<std::size_t>(cfg.d_hid),
                                        static_cast<std::size_t>(cfg.n_classes), mr);
        }
        TrainHistory hist = train_mil(result.mil, bag_ptrs(bags, train_idx),
                                      bag_ptrs(bags, val_idx), cfg.mil,
                                      stage_seed(cfg.seed, round, 6));

        RoundReport eval = evaluate_round(cfg, bags, result.mil, result.encoder, round);
        RoundReport full;
        full.round = round;
        for (auto& kv : eval.metrics) full.metrics.push_back(kv);
        full.put("mil_best_epoch", static_cast<double>(hist.best_epoch));
        full.put("mil_best_val_loss", hist.best_val_loss);
        for (auto& kv : rep.metrics) full.metrics.push_back(kv);

        if (write_outputs) {
            fs::create_directories(round_dir);
            full.write_csv(round_dir + "/report.csv");
            result.mil.save(round_dir + "/mil.ckpt");
            result.encoder.save(round_dir + "/encoder.ckpt");
            double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                              .count();
            // timing lives outside report.csv so reports stay byte-identical
            std::ofstream(round_dir + "/timing.csv") << "wall_clock_s," << secs << "\n";
        }
        result.reports.push_back(full);

        double val_auc = full.get("val_bag_auc");
        if (val_auc > best_val_auc) {
            best_val_auc = val_auc;
            rounds_since_best = 0;
        } else {
            ++rounds_since_best;
            if (rounds_since_best >= cfg.round_patience && round < cfg.iterations) break;
        }
    }
    return result;
}

std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<int>& k0_grid,
                            const std::vector<int>& c_grid, const std::vector<Bag>& bags) {
    std::vector<SweepRow> rows;
    for (int k0 : k0_grid) {
        for (int c : c_grid) {
            SweepRow row;
            row.k0 = k0;
            row.n_clusters = c;
            RunConfig cfg = base;
            cfg.k0 = k0;
            cfg.n_clusters = c;
            cfg.out_dir = base.out_dir + "/k0_" + std::to_string(k0) + "_c" + std::to_string(c);
            try {
                RunResult res = run_pipeline(cfg, bags, /*write_outputs=*/true);
                row.ok = true;
                row.final_report = res.reports.back();
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace hcft
