// Command-line front end for the clustering-driven feature fine-tuning
// pipeline. Subcommands cover data generation, training stages, inspection
// dumps, evaluation, the full iterative run, and hyper-parameter sweeps.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "hcft/cluster.hpp"
#include "hcft/confidence.hpp"
#include "hcft/data.hpp"
#include "hcft/encoder.hpp"
#include "hcft/errors.hpp"
#include "hcft/metrics.hpp"
#include "hcft/mil.hpp"
#include "hcft/pipeline.hpp"
#include "hcft/refine.hpp"

using namespace hcft;

namespace {

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw DataError("cannot open for write: " + path);
    return file;
}

std::vector<Bag> load_with_embeddings(const std::string& stem, const std::string& encoder_path) {
    std::vector<Bag> bags = load_cohort(stem);
    if (!encoder_path.empty()) {
        EncoderModel enc = EncoderModel::load(encoder_path);
        reextract(enc, bags);
    } else if (bags[0].instances[0].embedding.empty()) {
        throw DataError("cohort has no embeddings; pass --encoder to extract them");
    }
    return bags;
}

std::vector<std::size_t> train_indices(const std::vector<Bag>& bags) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < bags.size(); ++i)
        if (bags[i].split == Split::Train) idx.push_back(i);
    return idx;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    if (out.empty()) throw ConfigError("empty grid list");
    return out;
}

struct RefineArtifacts {
    PseudoInit init;
    std::vector<MinedNegative> mined;
    RefinementResult refined;
    PatchDataset dstar;
    ClusterModel first_clusters;
    ClassClusterSets first_sets;
};

// The shared confidence -> cluster -> mine -> refine chain used by the
// dump/cluster/refine/finetune subcommands.
RefineArtifacts refine_chain(const std::vector<Bag>& bags, const MILModel& mil,
                             const RunConfig& cfg, int t) {
    RefineArtifacts art;
    auto tr = train_indices(bags);
    if (tr.empty()) throw DataError("cohort has no training bags");
    art.init = init_pseudo_labels(mil, bags, tr, t, cfg.k0);
    std::size_t d = bags[0].instances[0].embedding.size();
    Matrix pts(art.init.sets.high.size(), d);
    std::vector<int> labels(art.init.sets.high.size());
    for (std::size_t i = 0; i < art.init.sets.high.size(); ++i) {
        const auto& ref = art.init.sets.high[i].ref;
        const auto& emb = bags[ref.bag_index].instances[ref.patch_index].embedding;
        std::copy(emb.begin(), emb.end(), pts.data.begin() + i * d);
        labels[i] = art.init.sets.high[i].label;
    }
    std::size_t k = std::min<std::size_t>(cfg.n_clusters, pts.rows);
    art.first_clusters = kmeans(pts, k, cfg.seed);
    art.first_sets = classify_all_classes(art.first_clusters, labels, cfg.n_classes, cfg.theta);
    art.mined = mine_potential_negatives(bags, art.init.sets.low, art.first_sets,
                                         art.first_clusters, cfg.n_classes);
    art.refined = refine_labels(bags, art.init.sets.high, art.mined, cfg.n_classes,
                                cfg.n_clusters, cfg.theta, cfg.seed + 1);
    art.dstar = build_patch_dataset(bags, art.refined.cleaned_high, art.refined.final_negatives,
                                    cfg.n_classes);
    return art;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Heuristic clustering-driven feature fine-tuning pipeline"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic cohort of feature-vector bags");
    CohortSpec spec;
    spec.bags_per_class = {50, 50};
    std::string gen_out = "cohort";
    int gen_bags_per_class = 50;
    gen->add_option("--out", gen_out, "Output file stem");
    gen->add_option("--n-classes", spec.n_classes, "Number of bag classes (>= 2)");
    gen->add_option("--bags-per-class", gen_bags_per_class, "Bags generated per class");
    gen->add_option("--bag-size-min", spec.bag_size_min, "Minimum instances per bag");
    gen->add_option("--bag-size-max", spec.bag_size_max, "Maximum instances per bag");
    gen->add_option("--positive-fraction-lo", spec.positive_fraction_lo,
                    "Lower bound on tumor fraction in positive bags");
    gen->add_option("--positive-fraction-hi", spec.positive_fraction_hi,
                    "Upper bound on tumor fraction in positive bags");
    gen->add_option("--mimic-fraction-lo", spec.mimic_fraction_lo,
                    "Lower bound on planted hard-negative fraction among negatives");
    gen->add_option("--mimic-fraction-hi", spec.mimic_fraction_hi,
                    "Upper bound on planted hard-negative fraction among negatives");
    gen->add_option("--d-raw", spec.d_raw, "Raw feature dimension");
    gen->add_option("--separation", spec.class_prototype_separation,
                    "Distance between class prototypes");
    gen->add_option("--noise-sigma", spec.noise_sigma, "Gaussian noise scale");
    gen->add_option("--seed", spec.seed, "Generator seed");

    // ---- split ----
    auto* split_cmd = app.add_subcommand("split", "Assign train/val/test splits, stratified by label");
    std::string split_stem = "cohort";
    double r_train = 0.8, r_val = 0.2, r_test = 0.0;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--cohort", split_stem, "Cohort file stem")->required();
    split_cmd->add_option("--train", r_train, "Training ratio");
    split_cmd->add_option("--val", r_val, "Validation ratio");
    split_cmd->add_option("--test", r_test, "Test ratio");
    split_cmd->add_option("--seed", split_seed, "Split seed");

    // shared options for model-driven subcommands
    RunConfig cfg;
    std::string stem, mil_path, enc_path, out_path;
    int t_iter = 0;

    auto add_common = [&](CLI::App* sub, bool needs_mil) {
        sub->add_option("--cohort", stem, "Cohort file stem")->required();
        if (needs_mil) sub->add_option("--mil", mil_path, "MIL checkpoint")->required();
        sub->add_option("--encoder", enc_path, "Encoder checkpoint (re-extracts embeddings)");
        sub->add_option("--out", out_path, "Output path (default stdout)");
        sub->add_option("--k0", cfg.k0, "Confidence top-K base K0");
        sub->add_option("--clusters", cfg.n_clusters, "Number of K-means clusters C");
        sub->add_option("--theta", cfg.theta, "Cluster ownership threshold");
        sub->add_option("--t", t_iter, "Iteration index for the K_t schedule");
        sub->add_option("--n-classes", cfg.n_classes, "Number of bag classes");
        sub->add_option("--seed", cfg.seed, "Seed");
    };

    // ---- train-mil ----
    auto* tm = app.add_subcommand("train-mil", "Train the gated-attention MIL model");
    std::string tm_out = "mil.ckpt";
    tm->add_option("--cohort", stem, "Cohort file stem")->required();
    tm->add_option("--encoder", enc_path, "Encoder checkpoint (re-extracts embeddings)");
    tm->add_option("--out", tm_out, "Where to write the MIL checkpoint");
    tm->add_option("--n-classes", cfg.n_classes, "Number of bag classes");
    tm->add_option("--d-emb", cfg.d_emb, "Embedding dimension (when initializing a fresh encoder)");
    tm->add_option("--d-att", cfg.d_att, "Attention dimension");
    tm->add_option("--d-hid", cfg.d_hid, "Classifier hidden width");
    tm->add_option("--lr-init", cfg.mil.lr_init, "Initial learning rate");
    tm->add_option("--lr-min", cfg.mil.lr_min, "Minimum learning rate");
    tm->add_option("--epochs", cfg.mil.max_epochs, "Maximum epochs");
    tm->add_option("--patience", cfg.mil.patience, "Early-stopping patience");
    tm->add_option("--seed", cfg.seed, "Seed");
    bool tm_fresh_encoder = false;
    tm->add_flag("--init-encoder", tm_fresh_encoder,
                 "Initialize a fresh random encoder and extract embeddings with it");

    // ---- dump-confidence ----
    auto* dc = app.add_subcommand("dump-confidence",
                                  "Per-instance attention/probability/confidence rows");
    add_common(dc, true);

    // ---- cluster ----
    auto* cl = app.add_subcommand("cluster", "First-pass clustering and per-class cluster ownership");
    add_common(cl, true);

    // ---- refine ----
    auto* rf = app.add_subcommand("refine", "Emit the refined patch dataset D*");
    add_common(rf, true);

    // ---- finetune ----
    auto* ft = app.add_subcommand("finetune", "Fine-tune the encoder on the refined patch dataset");
    add_common(ft, true);
    std::string ft_out = "encoder.ckpt";
    ft->add_option("--encoder-out", ft_out, "Where to write the fine-tuned encoder");
    ft->add_option("--enc-lr", cfg.encoder.lr, "Encoder learning rate");
    ft->add_option("--enc-batch", cfg.encoder.batch_size, "Encoder batch size");
    ft->add_option("--enc-epochs", cfg.encoder.max_epochs, "Encoder maximum epochs");
    ft->add_option("--enc-patience", cfg.encoder.patience, "Encoder early-stopping patience");

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "Bag- and patch-level metrics report");
    ev->add_option("--cohort", stem, "Cohort file stem")->required();
    ev->add_option("--mil", mil_path, "MIL checkpoint")->required();
    ev->add_option("--encoder", enc_path, "Encoder checkpoint")->required();
    ev->add_option("--out", out_path, "Output path (default stdout)");
    ev->add_option("--n-classes", cfg.n_classes, "Number of bag classes");

    // ---- froc ----
    auto* fr = app.add_subcommand("froc", "FROC curve as fpi,sensitivity rows");
    fr->add_option("--cohort", stem, "Cohort file stem")->required();
    fr->add_option("--encoder", enc_path, "Encoder checkpoint")->required();
    fr->add_option("--out", out_path, "Output path (default stdout)");
    fr->add_option("--n-classes", cfg.n_classes, "Number of bag classes");
    std::string froc_split = "test";
    fr->add_option("--split", froc_split, "Which split to score (train/val/test)");

    // ---- run ----
    auto* run_cmd = app.add_subcommand("run", "Full iterative pipeline");
    std::string run_config_file;
    bool run_resume = false;
    run_cmd->add_option("--cohort", stem, "Cohort file stem")->required();
    run_cmd->add_option("--config", run_config_file, "Config file (key = value lines)");
    run_cmd->add_option("--out-dir", cfg.out_dir, "Run output directory");
    run_cmd->add_option("--iterations", cfg.iterations, "Refinement rounds T");
    run_cmd->add_option("--round-patience", cfg.round_patience, "Round-level patience on val AUC");
    run_cmd->add_option("--k0", cfg.k0, "Confidence top-K base K0");
    run_cmd->add_option("--clusters", cfg.n_clusters, "Number of K-means clusters C");
    run_cmd->add_option("--theta", cfg.theta, "Cluster ownership threshold");
    run_cmd->add_option("--n-classes", cfg.n_classes, "Number of bag classes");
    run_cmd->add_option("--seed", cfg.seed, "Run seed");
    run_cmd->add_option("--d-emb", cfg.d_emb, "Embedding dimension");
    run_cmd->add_option("--d-att", cfg.d_att, "Attention dimension");
    run_cmd->add_option("--d-hid", cfg.d_hid, "Classifier hidden width");
    run_cmd->add_option("--mil-lr-init", cfg.mil.lr_init, "MIL initial learning rate");
    run_cmd->add_option("--mil-lr-min", cfg.mil.lr_min, "MIL minimum learning rate");
    run_cmd->add_option("--mil-epochs", cfg.mil.max_epochs, "MIL maximum epochs");
    run_cmd->add_option("--mil-patience", cfg.mil.patience, "MIL early-stopping patience");
    run_cmd->add_option("--enc-lr", cfg.encoder.lr, "Encoder learning rate");
    run_cmd->add_option("--enc-batch", cfg.encoder.batch_size, "Encoder batch size");
    run_cmd->add_option("--enc-epochs", cfg.encoder.max_epochs, "Encoder maximum epochs");
    run_cmd->add_option("--enc-patience", cfg.encoder.patience, "Encoder early-stopping patience");
    run_cmd->add_flag("--resume", run_resume, "Continue from existing round checkpoints");
    run_cmd->add_flag("--warm-start-mil", cfg.warm_start_mil,
                      "Reuse the previous round's MIL weights when retraining");
    run_cmd->add_flag("--reset-encoder", cfg.reset_encoder,
                      "Restart encoder fine-tuning from fresh weights each round");

    // ---- sweep ----
    auto* sw = app.add_subcommand("sweep", "Grid over K0 and C, one full run per cell");
    std::string k0_grid_csv = "10", c_grid_csv = "5";
    std::string sweep_config_file;
    sw->add_option("--cohort", stem, "Cohort file stem")->required();
    sw->add_option("--config", sweep_config_file, "Config file (key = value lines)");
    sw->add_option("--k0-grid", k0_grid_csv, "Comma-separated K0 values");
    sw->add_option("--c-grid", c_grid_csv, "Comma-separated C values");
    sw->add_option("--out-dir", cfg.out_dir, "Sweep output directory");
    sw->add_option("--out", out_path, "Result table path (default stdout)");
    sw->add_option("--iterations", cfg.iterations, "Refinement rounds T per cell");
    sw->add_option("--n-classes", cfg.n_classes, "Number of bag classes");
    sw->add_option("--seed", cfg.seed, "Run seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags are config errors
    }

    if (gen->parsed()) {
        spec.bags_per_class.assign(static_cast<std::size_t>(spec.n_classes), gen_bags_per_class);
        auto bags = generate_cohort(spec);
        save_cohort(bags, gen_out);
        std::cout << "wrote " << bags.size() << " bags (" << total_instances(bags)
                  << " instances) to " << gen_out << ".*\n";
        return 0;
    }
    if (split_cmd->parsed()) {
        auto bags = load_cohort(split_stem);
        split_cohort(bags, {r_train, r_val, r_test}, split_seed);
        save_cohort(bags, split_stem);
        std::cout << "split " << bags.size() << " bags\n";
        return 0;
    }
    if (tm->parsed()) {
        std::vector<Bag> bags = load_cohort(stem);
        if (tm_fresh_encoder) {
            Rng rng(cfg.seed);
            EncoderModel enc = EncoderModel::init(bags[0].instances[0].raw.size(),
                                                  static_cast<std::size_t>(cfg.d_emb),
                                                  static_cast<std::size_t>(2 * cfg.n_classes - 1),
                                                  rng);
            reextract(enc, bags);
        } else if (!enc_path.empty()) {
            reextract(EncoderModel::load(enc_path), bags);
        } else if (bags[0].instances[0].embedding.empty()) {
            throw DataError("cohort has no embeddings; pass --encoder or --init-encoder");
        }
        std::vector<const Bag*> tr, va;
        for (const auto& b : bags) {
            if (b.split == Split::Train) tr.push_back(&b);
            if (b.split == Split::Val) va.push_back(&b);
        }
        Rng mr(cfg.seed + 1);
        MILModel model = MILModel::init(bags[0].instances[0].embedding.size(),
                                        static_cast<std::size_t>(cfg.d_att),
                                        static_cast<std::size_t>(cfg.d_hid),
                                        static_cast<std::size_t>(cfg.n_classes), mr);
        TrainHistory hist = train_mil(model, tr, va, cfg.mil, cfg.seed + 2);
        model.save(tm_out);
        std::cout << "best epoch " << hist.best_epoch << ", val loss "
                  << format_double(hist.best_val_loss) << ", saved " << tm_out << "\n";
        return 0;
    }
    if (dc->parsed()) {
        auto bags = load_with_embeddings(stem, enc_path);
        MILModel mil = MILModel::load(mil_path);
        std::ofstream file;
        std::ostream& out = open_out(file, out_path);
        out << "slide_id,patch_index,attention,p_Y,score,rank\n";
        for (std::size_t bi : train_indices(bags)) {
            const Bag& bag = bags[bi];
            BagForward f = bag_forward(mil, bag);
            std::vector<double> s = confidence_scores(mil, bag);
            std::vector<std::size_t> order(s.size());
            for (std::size_t k = 0; k < s.size(); ++k) order[k] = k;
            std::stable_sort(order.begin(), order.end(), [&s](std::size_t a, std::size_t b) {
                return s[a] != s[b] ? s[a] > s[b] : a < b;
            });
            std::vector<std::size_t> rank(s.size());
            for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
            for (std::size_t k = 0; k < s.size(); ++k) {
                out << bag.slide_id << "," << k << "," << format_double(f.attention[k]) << ","
                    << format_double(f.instance_probs(k, bag.label)) << ","
                    << format_double(s[k]) << "," << rank[k] << "\n";
            }
        }
        return 0;
    }
    if (cl->parsed()) {
        auto bags = load_with_embeddings(stem, enc_path);
        MILModel mil = MILModel::load(mil_path);
        RefineArtifacts art = refine_chain(bags, mil, cfg, t_iter);
        std::vector<std::size_t> counts(art.first_clusters.centroids.rows, 0);
        for (std::size_t a : art.first_clusters.assignment) ++counts[a];
        std::ofstream file;
        std::ostream& out = open_out(file, out_path);
        out << "cluster_id,class,assigned_count,fraction\n";
        for (std::size_t c = 0; c < counts.size(); ++c) {
            int owner = 0;
            for (int a = 1; a < cfg.n_classes; ++a)
                if (art.first_sets.fractions(c, a) > art.first_sets.fractions(c, owner)) owner = a;
            out << c << "," << owner << "," << counts[c] << ","
                << format_double(art.first_sets.fractions(c, owner)) << "\n";
        }
        return 0;
    }
    if (rf->parsed()) {
        auto bags = load_with_embeddings(stem, enc_path);
        MILModel mil = MILModel::load(mil_path);
        RefineArtifacts art = refine_chain(bags, mil, cfg, t_iter);
        std::map<std::pair<std::size_t, std::size_t>, std::string> source;
        for (const auto& li : art.refined.cleaned_high)
            source[{li.ref.bag_index, li.ref.patch_index}] = "pos";
        for (const auto& mn : art.refined.middle_low)
            source[{mn.ref.bag_index, mn.ref.patch_index}] = "hardneg_from_Tl";
        for (const auto& mn : art.refined.middle_high)
            source[{mn.ref.bag_index, mn.ref.patch_index}] = "hardneg_from_Th";
        std::ofstream file;
        std::ostream& out = open_out(file, out_path);
        out << "slide_id,patch_index,label,source\n";
        for (const auto& e : art.dstar.entries) {
            const auto& rec = bags[e.ref.bag_index].instances[e.ref.patch_index];
            out << rec.slide_id << "," << rec.patch_index << "," << e.label << ","
                << source[{e.ref.bag_index, e.ref.patch_index}] << "\n";
        }
        return 0;
    }
    if (ft->parsed()) {
        auto bags = load_with_embeddings(stem, enc_path);
        MILModel mil = MILModel::load(mil_path);
        RefineArtifacts art = refine_chain(bags, mil, cfg, t_iter);
        EncoderModel enc = enc_path.empty()
                               ? throw ConfigError("finetune requires --encoder")
                               : EncoderModel::load(enc_path);
        auto res = train_encoder(enc, bags, art.dstar, cfg.encoder, cfg.seed + 2);
        enc.save(ft_out);
        std::cout << "fine-tuned on " << art.dstar.entries.size() << " patches, best epoch "
                  << res.best_epoch << ", saved " << ft_out << "\n";
        return 0;
    }
    if (ev->parsed()) {
        auto bags = load_cohort(stem);
        EncoderModel enc = EncoderModel::load(enc_path);
        reextract(enc, bags);
        MILModel mil = MILModel::load(mil_path);
        RoundReport rep = evaluate_round(cfg, bags, mil, enc, 0);
        std::ofstream file;
        std::ostream& out = open_out(file, out_path);
        out << "metric,value\n";
        for (const auto& [k, v] : rep.metrics) out << k << "," << format_double(v) << "\n";
        return 0;
    }
    if (fr->parsed()) {
        auto bags = load_cohort(stem);
        EncoderModel enc = EncoderModel::load(enc_path);
        Split which = split_from_name(froc_split);
        std::vector<double> scores;
        std::vector<char> truth;
        std::vector<std::string> slides;
        for (const auto& bag : bags) {
            if (bag.split != which) continue;
            for (const auto& rec : bag.instances) {
                if (!rec.truth_label) continue;
                scores.push_back(patch_tumor_score(enc, rec.raw, cfg.n_classes));
                truth.push_back(*rec.truth_label > 0 ? 1 : 0);
                slides.push_back(bag.slide_id);
            }
        }
        FrocCurve curve = froc(scores, truth, slides);
        std::ofstream file;
        std::ostream& out = open_out(file, out_path);
        out << "fpi,sensitivity\n";
        for (const auto& p : curve.points)
            out << format_double(p.fpi) << "," << format_double(p.sensitivity) << "\n";
        out << "# cpm," << format_double(cpm(curve)) << "\n";
        return 0;
    }
    if (run_cmd->parsed()) {
        RunConfig run_cfg = cfg;
        if (!run_config_file.empty()) {
            run_cfg = RunConfig::from_file(run_config_file);
            // explicit CLI flags override file values
            for (const auto* opt : run_cmd->get_options()) {
                if (opt->count() == 0) continue;
                const std::string& name = opt->get_name();
                if (name == "--out-dir") run_cfg.out_dir = cfg.out_dir;
                else if (name == "--iterations") run_cfg.iterations = cfg.iterations;
                else if (name == "--round-patience") run_cfg.round_patience = cfg.round_patience;
                else if (name == "--k0") run_cfg.k0 = cfg.k0;
                else if (name == "--clusters") run_cfg.n_clusters = cfg.n_clusters;
                else if (name == "--theta") run_cfg.theta = cfg.theta;
                else if (name == "--n-classes") run_cfg.n_classes = cfg.n_classes;
                else if (name == "--seed") run_cfg.seed = cfg.seed;
                else if (name == "--d-emb") run_cfg.d_emb = cfg.d_emb;
                else if (name == "--d-att") run_cfg.d_att = cfg.d_att;
                else if (name == "--d-hid") run_cfg.d_hid = cfg.d_hid;
                else if (name == "--mil-lr-init") run_cfg.mil.lr_init = cfg.mil.lr_init;
                else if (name == "--mil-lr-min") run_cfg.mil.lr_min = cfg.mil.lr_min;
                else if (name == "--mil-epochs") run_cfg.mil.max_epochs = cfg.mil.max_epochs;
                else if (name == "--mil-patience") run_cfg.mil.patience = cfg.mil.patience;
                else if (name == "--enc-lr") run_cfg.encoder.lr = cfg.encoder.lr;
                else if (name == "--enc-batch") run_cfg.encoder.batch_size = cfg.encoder.batch_size;
                else if (name == "--enc-epochs") run_cfg.encoder.max_epochs = cfg.encoder.max_epochs;
                else if (name == "--enc-patience") run_cfg.encoder.patience = cfg.encoder.patience;
                else if (name == "--warm-start-mil") run_cfg.warm_start_mil = cfg.warm_start_mil;
                else if (name == "--reset-encoder") run_cfg.reset_encoder = cfg.reset_encoder;
            }
        }
        auto bags = load_cohort(stem);
        RunResult res = run_pipeline(run_cfg, std::move(bags), true, run_resume);
        for (const auto& rep : res.reports) {
            std::cout << "round " << rep.round;
            for (const char* key : {"val_bag_auc", "test_bag_auc", "patch_f1"}) {
                try {
                    std::cout << "  " << key << "=" << format_double(rep.get(key));
                } catch (const DataError&) {
                }
            }
            std::cout << "\n";
        }
        return 0;
    }
    if (sw->parsed()) {
        RunConfig sweep_cfg = cfg;
        if (!sweep_config_file.empty()) {
            sweep_cfg = RunConfig::from_file(sweep_config_file);
            for (const auto* opt : sw->get_options()) {
                if (opt->count() == 0) continue;
                const std::string& name = opt->get_name();
                if (name == "--out-dir") sweep_cfg.out_dir = cfg.out_dir;
                else if (name == "--iterations") sweep_cfg.iterations = cfg.iterations;
                else if (name == "--n-classes") sweep_cfg.n_classes = cfg.n_classes;
                else if (name == "--seed") sweep_cfg.seed = cfg.seed;
            }
        }
        auto bags = load_cohort(stem);
        auto rows = sweep(sweep_cfg, parse_int_list(k0_grid_csv), parse_int_list(c_grid_csv), bags);
        std::ofstream file;
        std::ostream& out = open_out(file, out_path);
        out << "k0,clusters,status,test_bag_acc,test_bag_auc,test_bag_f1\n";
        for (const auto& row : rows) {
            out << row.k0 << "," << row.n_clusters << ",";
            if (!row.ok) {
                out << "error: " << row.error << ",,,\n";
                continue;
            }
            out << "ok";
            for (const char* key : {"test_bag_acc", "test_bag_auc", "test_bag_f1"}) {
                out << ",";
                try {
                    out << format_double(row.final_report.get(key));
                } catch (const DataError&) {
                }
            }
            out << "\n";
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
