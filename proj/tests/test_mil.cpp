#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hcft/errors.hpp"
#include "hcft/mil.hpp"

using namespace hcft;

namespace {

Bag make_bag(const std::vector<std::vector<double>>& embeddings, int label) {
    Bag bag;
    bag.slide_id = "t";
    bag.label = label;
    for (std::size_t k = 0; k < embeddings.size(); ++k) {
        InstanceRecord rec;
        rec.slide_id = "t";
        rec.patch_index = k;
        rec.embedding = embeddings[k];
        bag.instances.push_back(rec);
    }
    return bag;
}

// Separable toy cohort in embedding space: negatives cluster at the origin,
// positive bags carry a few instances offset along the first axis.
std::vector<Bag> toy_cohort(std::size_t n_bags, std::size_t d, Rng& rng) {
    std::vector<Bag> bags;
    for (std::size_t i = 0; i < n_bags; ++i) {
        int label = static_cast<int>(i % 2);
        std::vector<std::vector<double>> embs;
        for (int k = 0; k < 12; ++k) {
            std::vector<double> e(d);
            for (auto& v : e) v = 0.3 * rng.normal();
            if (label == 1 && k < 3) e[0] += 3.0;
            embs.push_back(e);
        }
        bags.push_back(make_bag(embs, label));
    }
    return bags;
}

}  // namespace

TEST_CASE("attention of a singleton bag is 1") {
    Rng rng(1);
    MILModel m = MILModel::init(4, 3, 5, 2, rng);
    Matrix e = Matrix::randn(1, 4, 1.0, rng);
    auto a = attention_scores(m, e);
    REQUIRE(a.size() == 1);
    CHECK(a[0] == doctest::Approx(1.0));
}

TEST_CASE("identical embeddings share attention equally") {
    Rng rng(2);
    MILModel m = MILModel::init(4, 3, 5, 2, rng);
    Matrix e(2, 4);
    for (int c = 0; c < 4; ++c) e(0, c) = e(1, c) = 0.7 * c - 1.0;
    auto a = attention_scores(m, e);
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.5));
}

TEST_CASE("permuting instances permutes attention and keeps bag logits") {
    Rng rng(3);
    MILModel m = MILModel::init(6, 4, 8, 2, rng);
    Matrix e = Matrix::randn(5, 6, 1.0, rng);
    BagForward f = bag_forward(m, e);

    // reverse the instances
    Matrix rev(5, 6);
    for (std::size_t k = 0; k < 5; ++k)
        for (std::size_t c = 0; c < 6; ++c) rev(k, c) = e(4 - k, c);
    BagForward g = bag_forward(m, rev);
    for (std::size_t k = 0; k < 5; ++k)
        CHECK(g.attention[k] == doctest::Approx(f.attention[4 - k]).epsilon(1e-12));
    for (std::size_t c = 0; c < 2; ++c)
        CHECK(std::abs(g.bag_logits[c] - f.bag_logits[c]) <= 1e-9);
}

TEST_CASE("attention sums to one and every weight is in (0,1)") {
    Rng rng(4);
    MILModel m = MILModel::init(8, 4, 8, 3, rng);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix e = Matrix::randn(1 + rng.below(20), 8, 2.0, rng);
        auto a = attention_scores(m, e);
        double sum = 0.0;
        for (double v : a) {
            CHECK(v > 0.0);
            CHECK(v < 1.0 + 1e-12);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("all-identical instances give that embedding back as the bag embedding") {
    Rng rng(5);
    MILModel m = MILModel::init(4, 3, 5, 2, rng);
    std::vector<double> h = {0.4, -1.2, 0.9, 0.0};
    Bag bag = make_bag({h, h, h}, 1);
    BagForward f = bag_forward(m, bag);
    for (std::size_t c = 0; c < 4; ++c) CHECK(f.bag_embedding[c] == doctest::Approx(h[c]));
}

TEST_CASE("hand-computed two-instance forward matches") {
    // Independent manual evaluation of the gated-attention forward pass.
    MILModel m;
    m.V1 = Matrix(2, 1);
    m.V1.data = {0.5, -0.25};
    m.V2 = Matrix(2, 1);
    m.V2.data = {1.0, 0.5};
    m.w = {2.0};
    m.W1 = Matrix(2, 2);
    m.W1.data = {1.0, 0.0, 0.0, 1.0};
    m.b1 = {0.0, 0.0};
    m.W2 = Matrix(2, 2);
    m.W2.data = {1.0, -1.0, 0.5, 0.5};
    m.b2 = {0.1, -0.1};

    Matrix e(2, 2);
    e.data = {1.0, 0.0, 0.0, 1.0};
    double s0 = 2.0 * std::tanh(0.5) / (1.0 + std::exp(-1.0));
    double s1 = 2.0 * std::tanh(-0.25) / (1.0 + std::exp(-0.5));
    double a0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
    double a1 = 1.0 - a0;
    double H0 = a0, H1 = a1;  // identity-ish embeddings
    double r0 = std::max(0.0, H0), r1 = std::max(0.0, H1);
    double l0 = r0 * 1.0 + r1 * 0.5 + 0.1;
    double l1 = r0 * -1.0 + r1 * 0.5 - 0.1;

    BagForward f = bag_forward(m, e);
    CHECK(f.attention[0] == doctest::Approx(a0).epsilon(1e-12));
    CHECK(f.attention[1] == doctest::Approx(a1).epsilon(1e-12));
    CHECK(f.bag_logits[0] == doctest::Approx(l0).epsilon(1e-12));
    CHECK(f.bag_logits[1] == doctest::Approx(l1).epsilon(1e-12));
}

TEST_CASE("instance probability rows sum to one") {
    Rng rng(6);
    MILModel m = MILModel::init(5, 3, 6, 3, rng);
    Matrix e = Matrix::randn(7, 5, 1.5, rng);
    BagForward f = bag_forward(m, e);
    for (std::size_t k = 0; k < 7; ++k) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) sum += f.instance_probs(k, c);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("bag loss gradient passes the finite-difference check") {
    Rng rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        MILModel m = MILModel::init(4, 3, 5, 2, rng);
        Matrix e = Matrix::randn(5, 4, 1.0, rng);
        int label = trial % 2;
        std::vector<double> grad;
        bag_loss_grad(m, e, label, grad);
        MILModel probe = m;
        auto f = [&probe, &e, label](const std::vector<double>& theta) {
            probe.unflatten(theta);
            std::vector<double> g;
            return bag_loss_grad(probe, e, label, g);
        };
        CHECK(grad_check(f, m.flatten(), grad) < 1e-4);
    }
}

TEST_CASE("training drives loss down on a separable cohort") {
    Rng rng(8);
    auto bags = toy_cohort(16, 4, rng);
    std::vector<const Bag*> train, val;
    for (std::size_t i = 0; i < bags.size(); ++i)
        (i < 12 ? train : val).push_back(&bags[i]);
    Rng mr(9);
    MILModel m = MILModel::init(4, 4, 8, 2, mr);
    TrainHistory hist = train_mil(m, train, val, TrainHyper{}, 10);
    CHECK(hist.train_loss.back() < 0.1);
}

TEST_CASE("patience zero stops after the first non-improving epoch") {
    // Random labels on random embeddings: validation loss cannot keep
    // improving, so patience 0 must stop the loop early.
    Rng rng(10);
    std::vector<Bag> bags;
    for (int i = 0; i < 8; ++i) {
        std::vector<std::vector<double>> embs;
        for (int k = 0; k < 6; ++k) {
            std::vector<double> e(4);
            for (auto& v : e) v = rng.normal();
            embs.push_back(e);
        }
        bags.push_back(make_bag(embs, static_cast<int>(rng.below(2))));
    }
    std::vector<const Bag*> train, val;
    for (std::size_t i = 0; i < bags.size(); ++i)
        (i < 6 ? train : val).push_back(&bags[i]);
    Rng mr(11);
    MILModel m = MILModel::init(4, 4, 8, 2, mr);
    TrainHyper hyper;
    hyper.patience = 0;
    hyper.lr_init = 5e-2;
    hyper.lr_min = 5e-2;
    hyper.max_epochs = 500;  // enough room that a plateau must appear
    TrainHistory hist = train_mil(m, train, val, hyper, 12);
    // stopped as soon as val loss failed to improve
    CHECK(static_cast<int>(hist.val_loss.size()) < hyper.max_epochs);
    CHECK(static_cast<int>(hist.val_loss.size()) == hist.best_epoch + 2);
}

TEST_CASE("training is deterministic for a fixed seed") {
    Rng rng(13);
    auto bags = toy_cohort(10, 4, rng);
    std::vector<const Bag*> train, val;
    for (std::size_t i = 0; i < bags.size(); ++i)
        (i < 8 ? train : val).push_back(&bags[i]);
    TrainHyper hyper;
    hyper.max_epochs = 30;
    Rng mr1(14), mr2(14);
    MILModel m1 = MILModel::init(4, 4, 8, 2, mr1);
    MILModel m2 = MILModel::init(4, 4, 8, 2, mr2);
    train_mil(m1, train, val, hyper, 15);
    train_mil(m2, train, val, hyper, 15);
    CHECK(m1.flatten() == m2.flatten());
}

TEST_CASE("checkpoint round trip") {
    Rng rng(16);
    MILModel m = MILModel::init(6, 4, 8, 3, rng);
    std::string path = "/tmp/hcft_mil_test.ckpt";
    m.save(path);
    MILModel loaded = MILModel::load(path);
    CHECK(loaded.flatten() == m.flatten());
}

TEST_CASE("empty bag is rejected") {
    Rng rng(17);
    MILModel m = MILModel::init(4, 3, 5, 2, rng);
    Bag bag;
    bag.slide_id = "empty";
    CHECK_THROWS(bag_forward(m, bag));
}
