#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcft/data.hpp"
#include "hcft/mat.hpp"

namespace hcft {

// Gated-attention MIL aggregator plus bag classifier. The classifier head is
// shared between bag-level prediction and per-instance probability readout.
struct MILModel {
    Matrix V1;  // D_emb x D_att
    Matrix V2;  // D_emb x D_att
    std::vector<double> w;  // D_att
    Matrix W1;  // D_emb x D_hid
    std::vector<double> b1;
    Matrix W2;  // D_hid x n_classes
    std::vector<double> b2;

    static MILModel init(std::size_t d_emb, std::size_t d_att, std::size_t d_hid,
                         std::size_t n_classes, Rng& rng);

    std::size_t n_classes() const { return W2.cols; }

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& theta);
    std::size_t param_count() const;

    void save(const std::string& path) const;
    static MILModel load(const std::string& path);
};

struct BagForward {
    std::vector<double> attention;      // N, sums to 1
    std::vector<double> bag_embedding;  // D_emb
    std::vector<double> bag_logits;     // n
    Matrix instance_probs;              // N x n, rows sum to 1
    int prediction = 0;
};

// Embedding matrix for one bag, instances as rows.
Matrix embedding_matrix(const Bag& bag);

std::vector<double> attention_scores(const MILModel& model, const Matrix& embeddings);

BagForward bag_forward(const MILModel& model, const Matrix& embeddings);
BagForward bag_forward(const MILModel& model, const Bag& bag);

// Cross-entropy of the bag logits against the bag label, with the analytic
// gradient for every parameter (flattened in the same order as flatten()).
double bag_loss_grad(const MILModel& model, const Matrix& embeddings, int label,
                     std::vector<double>& grad_out);

struct TrainHyper {
    double lr_init = 1e-3;
    double lr_min = 1e-4;
    int max_epochs = 200;
    int patience = 20;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    double best_val_loss = 0.0;
};

// Adam, batch size = one bag, cosine decay from lr_init to lr_min, early
// stopping on validation loss. Returns the best-validation snapshot.
TrainHistory train_mil(MILModel& model, const std::vector<const Bag*>& bags_train,
                       const std::vector<const Bag*>& bags_val, const TrainHyper& hyper,
                       std::uint64_t seed);

}  // namespace hcft
