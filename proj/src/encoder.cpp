#include "hcft/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hcft/errors.hpp"

namespace hcft {

EncoderModel EncoderModel::init(std::size_t d_raw, std::size_t d_emb, std::size_t n_patch_classes,
                                Rng& rng) {
    EncoderModel e;
    e.Wt = Matrix::randn(d_raw, d_emb, 1.0 / std::sqrt(static_cast<double>(d_raw)), rng);
    e.bt.assign(d_emb, 0.0);
    e.Wh = Matrix::randn(d_emb, n_patch_classes, 1.0 / std::sqrt(static_cast<double>(d_emb)), rng);
    e.bh.assign(n_patch_classes, 0.0);
    return e;
}

std::size_t EncoderModel::param_count() const {
    return Wt.data.size() + bt.size() + Wh.data.size() + bh.size();
}

std::vector<double> EncoderModel::flatten() const {
    std::vector<double> theta;
    theta.reserve(param_count());
    theta.insert(theta.end(), Wt.data.begin(), Wt.data.end());
    theta.insert(theta.end(), bt.begin(), bt.end());
    theta.insert(theta.end(), Wh.data.begin(), Wh.data.end());
    theta.insert(theta.end(), bh.begin(), bh.end());
    return theta;
}

void EncoderModel::unflatten(const std::vector<double>& theta) {
    if (theta.size() != param_count())
        throw DimensionError("EncoderModel::unflatten: size mismatch");
    std::size_t p = 0;
    auto take = [&theta, &p](std::vector<double>& v) {
        std::copy(theta.begin() + p, theta.begin() + p + v.size(), v.begin());
        p += v.size();
    };
    take(Wt.data);
    take(bt);
    take(Wh.data);
    take(bh);
}

std::vector<double> encode(const EncoderModel& enc, const std::vector<double>& raw) {
    if (raw.size() != enc.Wt.rows)
        throw DimensionError("encode: raw dim " + std::to_string(raw.size()) +
                             " does not match trunk dim " + std::to_string(enc.Wt.rows));
    Matrix x(1, raw.size());
    x.data = raw;
    Matrix h = activate(affine(x, enc.Wt, enc.bt), Activation::Tanh);
    return h.data;
}

double encoder_loss_grad(const EncoderModel& enc, const Matrix& raw_batch,
                         const std::vector<int>& targets, std::vector<double>& grad_out) {
    Matrix z = affine(raw_batch, enc.Wt, enc.bt);
    Matrix h = activate(z, Activation::Tanh);
    Matrix logits = affine(h, enc.Wh, enc.bh);
    auto ce = cross_entropy(logits, targets);

    auto gh = affine_backward(h, enc.Wh, ce.grad);
    Matrix dz = gh.dx;
    for (std::size_t i = 0; i < dz.data.size(); ++i)
        dz.data[i] *= 1.0 - h.data[i] * h.data[i];
    auto gt = affine_backward(raw_batch, enc.Wt, dz);

    grad_out.clear();
    grad_out.reserve(enc.param_count());
    grad_out.insert(grad_out.end(), gt.dW.data.begin(), gt.dW.data.end());
    grad_out.insert(grad_out.end(), gt.db.begin(), gt.db.end());
    grad_out.insert(grad_out.end(), gh.dW.data.begin(), gh.dW.data.end());
    grad_out.insert(grad_out.end(), gh.db.begin(), gh.db.end());
    return ce.loss;
}

namespace {

double mean_loss(const EncoderModel& enc, const Matrix& raws, const std::vector<int>& targets) {
    Matrix z = affine(raws, enc.Wt, enc.bt);
    Matrix h = activate(z, Activation::Tanh);
    Matrix logits = affine(h, enc.Wh, enc.bh);
    return cross_entropy(logits, targets).loss;
}

Matrix gather_rows(const std::vector<Bag>& bags, const PatchDataset& ds,
                   const std::vector<std::size_t>& idx) {
    const auto& first = ds.entries[idx[0]].ref;
    std::size_t d = bags[first.bag_index].instances[first.patch_index].raw.size();
    Matrix m(idx.size(), d);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& ref = ds.entries[idx[i]].ref;
        const auto& raw = bags[ref.bag_index].instances[ref.patch_index].raw;
        std::copy(raw.begin(), raw.end(), m.data.begin() + i * d);
    }
    return m;
}

}  // namespace

EncoderTrainResult train_encoder(EncoderModel& enc, const std::vector<Bag>& bags,
                                 const PatchDataset& dataset, const EncoderHyper& hyper,
                                 std::uint64_t seed) {
    if (dataset.entries.empty()) throw DataError("train_encoder: empty patch dataset");
    EncoderTrainResult res;
    {
        int present = 0;
        for (auto c : dataset.histogram)
            if (c > 0) ++present;
        res.degenerate_dataset = present <= 1;
    }
    Rng rng(seed);

    // stratified 80/20 split by label
    std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(dataset.n_classes));
    for (std::size_t i = 0; i < dataset.entries.size(); ++i)
        by_label[static_cast<std::size_t>(dataset.entries[i].label)].push_back(i);
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t c = 0; c < by_label.size(); ++c) {
        auto& group = by_label[c];
        if (group.empty()) continue;
        Rng grp = rng.split(c);
        grp.shuffle(group);
        std::size_t n_val = group.size() / 5;
        if (n_val == 0 && group.size() > 1) n_val = 1;
        for (std::size_t i = 0; i < group.size(); ++i)
            (i < n_val ? val_idx : train_idx).push_back(group[i]);
    }
    if (train_idx.empty()) throw DataError("train_encoder: no training entries after split");
    if (val_idx.empty()) val_idx = train_idx;  // tiny datasets validate on themselves
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    Matrix val_raws = gather_rows(bags, dataset, val_idx);
    std::vector<int> val_targets(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i)
        val_targets[i] = dataset.entries[val_idx[i]].label;

    std::vector<double> theta = enc.flatten();
    std::vector<double> best_theta = theta;
    res.best_val_loss = std::numeric_limits<double>::infinity();
    Adam adam;
    int bad_epochs = 0;
    Rng shuffler = rng.split(0xb17c0de);

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        shuffler.shuffle(train_idx);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t off = 0; off < train_idx.size();
             off += static_cast<std::size_t>(hyper.batch_size)) {
            std::size_t end = std::min(train_idx.size(),
                                       off + static_cast<std::size_t>(hyper.batch_size));
            std::vector<std::size_t> batch(train_idx.begin() + off, train_idx.begin() + end);
            Matrix raws = gather_rows(bags, dataset, batch);
            std::vector<int> targets(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                targets[i] = dataset.entries[batch[i]].label;
            enc.unflatten(theta);
            std::vector<double> grad;
            double loss = encoder_loss_grad(enc, raws, targets, grad);
            if (!std::isfinite(loss)) throw TrainingError("train_encoder: loss diverged", epoch);
            epoch_loss += loss;
            ++batches;
            adam.step(theta, grad, hyper.lr);
        }
        enc.unflatten(theta);
        res.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, batches)));
        double val = mean_loss(enc, val_raws, val_targets);
        if (!std::isfinite(val))
            throw TrainingError("train_encoder: validation loss diverged", epoch);
        res.val_loss.push_back(val);
        if (val < res.best_val_loss) {
            res.best_val_loss = val;
            res.best_epoch = epoch;
            best_theta = theta;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs > hyper.patience) break;
        }
    }
    enc.unflatten(best_theta);
    return res;
}

void reextract(const EncoderModel& enc, std::vector<Bag>& bags) {
    for (auto& bag : bags) {
        for (auto& rec : bag.instances) {
            std::vector<double> h = encode(enc, rec.raw);
            for (auto& v : h) v = static_cast<double>(static_cast<float>(v));
            rec.embedding = std::move(h);
        }
    }
}

std::vector<double> patch_predict(const EncoderModel& enc, const std::vector<double>& raw) {
    Matrix x(1, raw.size());
    x.data = raw;
    Matrix h = activate(affine(x, enc.Wt, enc.bt), Activation::Tanh);
    Matrix probs = softmax_rows(affine(h, enc.Wh, enc.bh));
    return probs.data;
}

double patch_tumor_score(const EncoderModel& enc, const std::vector<double>& raw, int n_classes) {
    std::vector<double> p = patch_predict(enc, raw);
    double s = 0.0;
    for (int c = 1; c < n_classes; ++c) s += p[static_cast<std::size_t>(c)];
    return s;
}

namespace {
const char kEncMagic[8] = {'H', 'C', 'F', 'T', 'E', 'N', 'C', '1'};
}

void EncoderModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(kEncMagic, 8);
    std::uint32_t vals[4] = {1, static_cast<std::uint32_t>(Wt.rows),
                             static_cast<std::uint32_t>(Wt.cols),
                             static_cast<std::uint32_t>(Wh.cols)};
    out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
    std::vector<double> theta = flatten();
    out.write(reinterpret_cast<const char*>(theta.data()),
              static_cast<std::streamsize>(8 * theta.size()));
    if (!out) throw DataError("write failed: " + path);
}

EncoderModel EncoderModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for read: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kEncMagic, 8) != 0)
        throw FormatError("bad magic in " + path, 0);
    std::uint32_t vals[4];
    in.read(reinterpret_cast<char*>(vals), sizeof(vals));
    if (in.gcount() != sizeof(vals) || vals[0] != 1)
        throw FormatError("bad header in " + path, 8);
    Rng dummy(0);
    EncoderModel e = init(vals[1], vals[2], vals[3], dummy);
    std::vector<double> theta(e.param_count());
    in.read(reinterpret_cast<char*>(theta.data()), static_cast<std::streamsize>(8 * theta.size()));
    if (in.gcount() != static_cast<std::streamsize>(8 * theta.size()))
        throw FormatError("truncated checkpoint " + path, 24);
    e.unflatten(theta);
    return e;
}

}  // namespace hcft
