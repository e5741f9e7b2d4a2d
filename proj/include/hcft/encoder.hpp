#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcft/data.hpp"
#include "hcft/mat.hpp"
#include "hcft/refine.hpp"

namespace hcft {

// Trainable adapter encoder: affine trunk + tanh into embedding space, affine
// head over the 2n-1 patch classes. The trunk is what downstream consumes; the
// head exists for fine-tuning and patch-level prediction.
struct EncoderModel {
    Matrix Wt;  // D_raw x D_emb
    std::vector<double> bt;
    Matrix Wh;  // D_emb x (2n-1)
    std::vector<double> bh;

    static EncoderModel init(std::size_t d_raw, std::size_t d_emb, std::size_t n_patch_classes,
                             Rng& rng);

    std::size_t n_patch_classes() const { return Wh.cols; }

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& theta);
    std::size_t param_count() const;

    void save(const std::string& path) const;
    static EncoderModel load(const std::string& path);
};

std::vector<double> encode(const EncoderModel& enc, const std::vector<double>& raw);

// Mini-batch loss + flat gradient over a batch of raw rows.
double encoder_loss_grad(const EncoderModel& enc, const Matrix& raw_batch,
                         const std::vector<int>& targets, std::vector<double>& grad_out);

struct EncoderHyper {
    double lr = 5e-5;
    int batch_size = 64;
    int max_epochs = 200;
    int patience = 20;
};

struct EncoderTrainResult {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    bool degenerate_dataset = false;  // single-class D*
};

// Adam on cross-entropy over the patch dataset, with an internal stratified
// 80/20 validation split and early stopping. Returns the best-val snapshot.
EncoderTrainResult train_encoder(EncoderModel& enc, const std::vector<Bag>& bags,
                                 const PatchDataset& dataset, const EncoderHyper& hyper,
                                 std::uint64_t seed);

// embedding := tanh(trunk(raw)) for every instance in every split, quantized
// to f32 so the binary store round-trips bit-exactly.
void reextract(const EncoderModel& enc, std::vector<Bag>& bags);

std::vector<double> patch_predict(const EncoderModel& enc, const std::vector<double>& raw);

// Binary tumor score: total positive-class probability mass (classes 1..n-1 of
// the original class set; hard-negative classes count as negative evidence).
double patch_tumor_score(const EncoderModel& enc, const std::vector<double>& raw, int n_classes);

}  // namespace hcft
