#include "hcft/mil.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "hcft/errors.hpp"

namespace hcft {

MILModel MILModel::init(std::size_t d_emb, std::size_t d_att, std::size_t d_hid,
                        std::size_t n_classes, Rng& rng) {
    MILModel m;
    m.V1 = Matrix::randn(d_emb, d_att, 1.0 / std::sqrt(static_cast<double>(d_emb)), rng);
    m.V2 = Matrix::randn(d_emb, d_att, 1.0 / std::sqrt(static_cast<double>(d_emb)), rng);
    m.w.resize(d_att);
    for (auto& v : m.w) v = rng.normal() / std::sqrt(static_cast<double>(d_att));
    m.W1 = Matrix::randn(d_emb, d_hid, 1.0 / std::sqrt(static_cast<double>(d_emb)), rng);
    m.b1.assign(d_hid, 0.0);
    m.W2 = Matrix::randn(d_hid, n_classes, 1.0 / std::sqrt(static_cast<double>(d_hid)), rng);
    m.b2.assign(n_classes, 0.0);
    return m;
}

std::size_t MILModel::param_count() const {
    return V1.data.size() + V2.data.size() + w.size() + W1.data.size() + b1.size() +
           W2.data.size() + b2.size();
}

std::vector<double> MILModel::flatten() const {
    std::vector<double> theta;
    theta.reserve(param_count());
    auto app = [&theta](const std::vector<double>& v) {
        theta.insert(theta.end(), v.begin(), v.end());
    };
    app(V1.data);
    app(V2.data);
    app(w);
    app(W1.data);
    app(b1);
    app(W2.data);
    app(b2);
    return theta;
}

void MILModel::unflatten(const std::vector<double>& theta) {
    if (theta.size() != param_count()) throw DimensionError("MILModel::unflatten: size mismatch");
    std::size_t p = 0;
    auto take = [&theta, &p](std::vector<double>& v) {
        std::copy(theta.begin() + p, theta.begin() + p + v.size(), v.begin());
        p += v.size();
    };
    take(V1.data);
    take(V2.data);
    take(w);
    take(W1.data);
    take(b1);
    take(W2.data);
    take(b2);
}

Matrix embedding_matrix(const Bag& bag) {
    if (bag.instances.empty()) throw DataError("empty bag: " + bag.slide_id);
    std::size_t d = bag.instances[0].embedding.size();
    if (d == 0) throw DataError("bag has no embeddings: " + bag.slide_id);
    Matrix e(bag.instances.size(), d);
    for (std::size_t k = 0; k < bag.instances.size(); ++k) {
        if (bag.instances[k].embedding.size() != d)
            throw DimensionError("ragged embeddings in bag " + bag.slide_id);
        std::copy(bag.instances[k].embedding.begin(), bag.instances[k].embedding.end(),
                  e.data.begin() + k * d);
    }
    return e;
}

namespace {

// Intermediate activations of one bag forward pass, kept for the backward.
struct ForwardCache {
    Matrix t;        // tanh(E V1), N x A
    Matrix s;        // sigm(E V2), N x A
    std::vector<double> att;   // softmax scores, N
    std::vector<double> H;     // D_emb
    std::vector<double> z1;    // D_hid, pre-relu
    std::vector<double> r1;    // D_hid
    std::vector<double> logits;  // n
};

ForwardCache forward_cache(const MILModel& m, const Matrix& E) {
    if (E.rows == 0) throw DataError("bag_forward: empty bag");
    if (E.cols != m.V1.rows)
        throw DimensionError("bag_forward: embedding dim " + std::to_string(E.cols) +
                             " does not match model dim " + std::to_string(m.V1.rows));
    ForwardCache c;
    std::vector<double> zero_a(m.V1.cols, 0.0);
    c.t = activate(affine(E, m.V1, zero_a), Activation::Tanh);
    c.s = activate(affine(E, m.V2, zero_a), Activation::Sigmoid);

    std::size_t N = E.rows, A = m.V1.cols, D = E.cols;
    Matrix scores(1, N);
    for (std::size_t k = 0; k < N; ++k) {
        double e = 0.0;
        for (std::size_t a = 0; a < A; ++a) e += m.w[a] * c.t(k, a) * c.s(k, a);
        scores(0, k) = e;
    }
    Matrix att = softmax_rows(scores);
    c.att.assign(att.data.begin(), att.data.end());

    c.H.assign(D, 0.0);
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t d = 0; d < D; ++d) c.H[d] += c.att[k] * E(k, d);

    Matrix Hm(1, D);
    Hm.data = c.H;
    Matrix z1 = affine(Hm, m.W1, m.b1);
    c.z1.assign(z1.data.begin(), z1.data.end());
    Matrix r1 = activate(z1, Activation::Relu);
    c.r1.assign(r1.data.begin(), r1.data.end());
    Matrix logits = affine(r1, m.W2, m.b2);
    c.logits.assign(logits.data.begin(), logits.data.end());
    return c;
}

}  // namespace

std::vector<double> attention_scores(const MILModel& model, const Matrix& embeddings) {
    return forward_cache(model, embeddings).att;
}

BagForward bag_forward(const MILModel& model, const Matrix& embeddings) {
    ForwardCache c = forward_cache(model, embeddings);
    BagForward out;
    out.attention = c.att;
    out.bag_embedding = c.H;
    out.bag_logits = c.logits;
    out.prediction = static_cast<int>(
        std::max_element(c.logits.begin(), c.logits.end()) - c.logits.begin());

    // Instance probabilities: classifier head applied to each instance.
    Matrix z1 = affine(embeddings, model.W1, model.b1);
    Matrix r1 = activate(z1, Activation::Relu);
    out.instance_probs = softmax_rows(affine(r1, model.W2, model.b2));
    return out;
}

BagForward bag_forward(const MILModel& model, const Bag& bag) {
    return bag_forward(model, embedding_matrix(bag));
}

double bag_loss_grad(const MILModel& m, const Matrix& E, int label,
                     std::vector<double>& grad_out) {
    ForwardCache c = forward_cache(m, E);
    std::size_t N = E.rows, A = m.V1.cols, D = E.cols, hid = m.W1.cols, n = m.W2.cols;

    Matrix logits(1, n);
    logits.data = c.logits;
    auto ce = cross_entropy(logits, {label});

    // dlogits -> head
    Matrix r1(1, hid);
    r1.data = c.r1;
    auto g2 = affine_backward(r1, m.W2, ce.grad);
    Matrix dz1 = g2.dx;
    for (std::size_t j = 0; j < hid; ++j)
        if (c.z1[j] <= 0.0) dz1(0, j) = 0.0;
    Matrix Hm(1, D);
    Hm.data = c.H;
    auto g1 = affine_backward(Hm, m.W1, dz1);

    // dH -> attention and embeddings path (embeddings are constants here)
    const std::vector<double>& dH = g1.dx.data;
    std::vector<double> da(N, 0.0);
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t d = 0; d < D; ++d) da[k] += dH[d] * E(k, d);

    // softmax backward over the attention scores
    double dot = 0.0;
    for (std::size_t k = 0; k < N; ++k) dot += c.att[k] * da[k];
    std::vector<double> de(N);
    for (std::size_t k = 0; k < N; ++k) de[k] = c.att[k] * (da[k] - dot);

    // scores e_k = sum_a w_a * t_ka * s_ka
    std::vector<double> dw(A, 0.0);
    Matrix dpre1(N, A), dpre2(N, A);
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t a = 0; a < A; ++a) {
            double t = c.t(k, a), s = c.s(k, a);
            dw[a] += de[k] * t * s;
            double dg_t = de[k] * m.w[a] * s;  // through t
            double dg_s = de[k] * m.w[a] * t;  // through s
            dpre1(k, a) = dg_t * (1.0 - t * t);
            dpre2(k, a) = dg_s * s * (1.0 - s);
        }
    }
    auto gv1 = affine_backward(E, m.V1, dpre1);
    auto gv2 = affine_backward(E, m.V2, dpre2);

    grad_out.clear();
    grad_out.reserve(m.param_count());
    auto app = [&grad_out](const std::vector<double>& v) {
        grad_out.insert(grad_out.end(), v.begin(), v.end());
    };
    app(gv1.dW.data);
    app(gv2.dW.data);
    app(dw);
    app(g1.dW.data);
    app(g1.db);
    app(g2.dW.data);
    app(g2.db);
    return ce.loss;
}

namespace {

double mean_bag_loss(const MILModel& m, const std::vector<const Bag*>& bags) {
    double total = 0.0;
    for (const Bag* b : bags) {
        Matrix E = embedding_matrix(*b);
        BagForward f = bag_forward(m, E);
        Matrix logits(1, f.bag_logits.size());
        logits.data = f.bag_logits;
        total += cross_entropy(logits, {b->label}).loss;
    }
    return total / static_cast<double>(bags.size());
}

}  // namespace

TrainHistory train_mil(MILModel& model, const std::vector<const Bag*>& bags_train,
                       const std::vector<const Bag*>& bags_val, const TrainHyper& hyper,
                       std::uint64_t seed) {
    if (bags_train.empty() || bags_val.empty())
        throw DataError("train_mil: empty train or val bag list");
    Rng rng(seed);
    std::vector<double> theta = model.flatten();
    Adam adam;
    TrainHistory hist;
    std::vector<double> best_theta = theta;
    hist.best_val_loss = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    std::vector<std::size_t> order(bags_train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        double frac = hyper.max_epochs > 1
                          ? static_cast<double>(epoch) / static_cast<double>(hyper.max_epochs - 1)
                          : 0.0;
        double lr = hyper.lr_min +
                    0.5 * (hyper.lr_init - hyper.lr_min) * (1.0 + std::cos(3.141592653589793 * frac));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t i : order) {
            model.unflatten(theta);
            std::vector<double> grad;
            Matrix E = embedding_matrix(*bags_train[i]);
            double loss = bag_loss_grad(model, E, bags_train[i]->label, grad);
            if (!std::isfinite(loss)) throw TrainingError("train_mil: loss diverged", epoch);
            epoch_loss += loss;
            adam.step(theta, grad, lr);
        }
        model.unflatten(theta);
        hist.train_loss.push_back(epoch_loss / static_cast<double>(bags_train.size()));
        double val = mean_bag_loss(model, bags_val);
        if (!std::isfinite(val)) throw TrainingError("train_mil: validation loss diverged", epoch);
        hist.val_loss.push_back(val);
        if (val < hist.best_val_loss) {
            hist.best_val_loss = val;
            hist.best_epoch = epoch;
            best_theta = theta;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs > hyper.patience) break;
        }
    }
    model.unflatten(best_theta);
    return hist;
}

namespace {
const char kMilMagic[8] = {'H', 'C', 'F', 'T', 'M', 'I', 'L', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::ifstream& in, const std::string& path, std::size_t off) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (in.gcount() != 4) throw FormatError("truncated checkpoint " + path, off);
    return v;
}
}  // namespace

void MILModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for write: " + path);
    out.write(kMilMagic, 8);
    write_u32(out, 1);  // version
    write_u32(out, static_cast<std::uint32_t>(V1.rows));
    write_u32(out, static_cast<std::uint32_t>(V1.cols));
    write_u32(out, static_cast<std::uint32_t>(W1.cols));
    write_u32(out, static_cast<std::uint32_t>(W2.cols));
    std::vector<double> theta = flatten();
    out.write(reinterpret_cast<const char*>(theta.data()),
              static_cast<std::streamsize>(8 * theta.size()));
    if (!out) throw DataError("write failed: " + path);
}

MILModel MILModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for read: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMilMagic, 8) != 0)
        throw FormatError("bad magic in " + path, 0);
    if (read_u32(in, path, 8) != 1) throw FormatError("bad version in " + path, 8);
    std::uint32_t d_emb = read_u32(in, path, 12);
    std::uint32_t d_att = read_u32(in, path, 16);
    std::uint32_t d_hid = read_u32(in, path, 20);
    std::uint32_t n = read_u32(in, path, 24);
    Rng dummy(0);
    MILModel m = init(d_emb, d_att, d_hid, n, dummy);
    std::vector<double> theta(m.param_count());
    in.read(reinterpret_cast<char*>(theta.data()), static_cast<std::streamsize>(8 * theta.size()));
    if (in.gcount() != static_cast<std::streamsize>(8 * theta.size()))
        throw FormatError("truncated checkpoint " + path, 28);
    m.unflatten(theta);
    return m;
}

}  // namespace hcft
