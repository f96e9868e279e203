#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scbench/dataset.hpp"

namespace scbench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AlignmentDims {
    std::size_t d_a = 0;     // accessibility peaks
    std::size_t d_r = 0;     // expression genes
    std::size_t d_h = 8;     // shared latent width
    std::size_t d_h_in = 32; // embedding width feeding the encoders
    std::size_t n_classes = 1;

    void validate() const;
    bool operator==(const AlignmentDims &) const = default;
};

/// Affine layer. The bias is kept as a one-column matrix so every parameter
/// block has the same type.
struct Linear {
    MatrixXd W;
    MatrixXd b;
};

/// in -> Linear -> leaky ReLU(0.01) -> Linear -> out
struct Mlp {
    Linear l1;
    Linear l2;
};

/// Cross-modality translator: per-modality embeddings, encoders into a shared
/// latent space, decoders back out, latent mappers between the two modalities
/// and one discriminator pair per class.
struct AlignmentModel {
    AlignmentDims dims;
    double gamma = 1.0;

    // Column j of emb_a0 / emb_a1 is the embedding of peak j when closed / open.
    MatrixXd emb_a0;
    MatrixXd emb_a1;
    MatrixXd emb_r;          // d_h_in x d_r, no bias

    Mlp enc_a, enc_r;        // d_h_in -> 2 d_h -> d_h
    Mlp dec_a, dec_r;        // d_h -> 2 d_h -> d_a logits / d_r values
    Mlp map_ar, map_ra;      // d_h -> 2 d_h -> d_h
    std::vector<Mlp> disc_a; // d_h -> d_h -> 1 logit, one per class
    std::vector<Mlp> disc_r;

    /// Calls f(name, block, is_discriminator) for every parameter block in a
    /// fixed order.
    template <class F> void visit(F &&f) { visit_impl(*this, f); }
    template <class F> void visit(F &&f) const { visit_impl(*this, f); }

    std::size_t parameter_count() const;

  private:
    template <class Self, class F> static void visit_impl(Self &self, F &f) {
        f("emb_a0", self.emb_a0, false);
        f("emb_a1", self.emb_a1, false);
        f("emb_r", self.emb_r, false);
        auto mlp = [&](const std::string &name, auto &m, bool disc) {
            f(name + ".l1.W", m.l1.W, disc);
            f(name + ".l1.b", m.l1.b, disc);
            f(name + ".l2.W", m.l2.W, disc);
            f(name + ".l2.b", m.l2.b, disc);
        };
        mlp("enc_a", self.enc_a, false);
        mlp("enc_r", self.enc_r, false);
        mlp("dec_a", self.dec_a, false);
        mlp("dec_r", self.dec_r, false);
        mlp("map_ar", self.map_ar, false);
        mlp("map_ra", self.map_ra, false);
        for (std::size_t k = 0; k < self.disc_a.size(); ++k) mlp("disc_a." + std::to_string(k), self.disc_a[k], true);
        for (std::size_t k = 0; k < self.disc_r.size(); ++k) mlp("disc_r." + std::to_string(k), self.disc_r[k], true);
    }
};

/// Random initialization (normal, scaled by 1/sqrt(fan-in)); deterministic in `seed`.
AlignmentModel init_model(const AlignmentDims &dims, double gamma, std::uint64_t seed);

/// Same shapes, every parameter zero. Used as a gradient accumulator.
AlignmentModel zeros_like(const AlignmentModel &model);

/// Paired cells of one class, one cell per column.
struct PairedBatch {
    MatrixXd x; // d_a x B, entries 0/1
    MatrixXd y; // d_r x B
};

struct PairedCell {
    VectorXd atac;
    VectorXd rna;
    std::size_t label = 0; // 0-based class index
};

/// Embedding stage alone: sum over peaks of the open/closed embedding column.
MatrixXd embed_atac(const AlignmentModel &model, const MatrixXd &x);
MatrixXd encode_atac(const AlignmentModel &model, const MatrixXd &x);
MatrixXd encode_rna(const AlignmentModel &model, const MatrixXd &y);

/// Pseudo-expression for each column of `x`: dec_r(map_ar(enc_a(emb_a(x)))).
MatrixXd translate(const AlignmentModel &model, const MatrixXd &x);

inline constexpr double kProbClamp = 1e-7;

// Each loss is a mean over the batch of per-cell terms; BCE and MSE terms are
// themselves means over their feature dimension. When `grad` is given,
// `scale` times the gradient with respect to every parameter is added to it.

/// BCE(sigmoid(dec_a(h_a)), x) + MSE(dec_r(h_r), y)
double reconstruction_loss(const AlignmentModel &model, const PairedBatch &batch, AlignmentModel *grad = nullptr,
                           double scale = 1.0);

/// -[log D_a(h_a) + log(1 - D_a(map_ra(h_r))) + log D_r(h_r) + log(1 - D_r(map_ar(h_a)))]
/// using the discriminators of class `k`.
double discriminator_loss(const AlignmentModel &model, const PairedBatch &batch, std::size_t k,
                          AlignmentModel *grad = nullptr, double scale = 1.0);

/// -log D_r(map_ar(h_a)) + MSE(map_ra(map_ar(h_a)), h_a)
///   - log D_a(map_ra(h_r)) + MSE(map_ar(map_ra(h_r)), h_r)
double generator_loss(const AlignmentModel &model, const PairedBatch &batch, std::size_t k,
                      AlignmentModel *grad = nullptr, double scale = 1.0);

struct TrainConfig {
    double step_size = 1e-3;
    std::size_t steps = 2000;
    std::size_t batch_size = 32; // per class; 0 uses every cell of the class
    double gamma = 1.0;
    std::uint64_t seed = 0;
    std::size_t disc_steps = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

struct StepLoss {
    double reconstruction = 0.0;
    double generator = 0.0;     // mean over classes
    double discriminator = 0.0; // mean over classes, last discriminator step
};

struct TrainResult {
    AlignmentModel model;
    std::vector<StepLoss> history;
};

/// Alternating optimization: `disc_steps` Adam steps on the class-averaged
/// discriminator loss (discriminator parameters only), then one Adam step on
/// reconstruction + gamma * class-averaged generator loss (all other
/// parameters). Minibatches are drawn per class with replacement. Throws
/// NumericalError when a loss becomes non-finite.
TrainResult train(AlignmentModel model, const std::vector<PairedCell> &data, const TrainConfig &cfg,
                  const std::function<void(std::size_t, const StepLoss &)> &progress = {});

/// Column indices of the `n_keep` highest-scoring peaks, ascending. A peak's
/// score is sum_i x_ij / total_i * ln(n_cells / (1 + count_j)); ties keep the
/// lower index.
std::vector<std::size_t> tfidf_select(const ExpressionMatrix &peaks, std::size_t n_keep);

struct MarkerR2 {
    std::vector<std::optional<double>> per_marker; // nullopt for zero-variance markers
    double mean = 0.0;                             // over defined markers; NaN if none
};

/// R^2 of the per-class mean of each marker column. Rows are cells.
MarkerR2 marker_r2(const MatrixXd &predicted, const MatrixXd &observed, const std::vector<std::size_t> &labels,
                   const std::vector<std::size_t> &markers);

enum class LossFamily { reconstruction, discriminator, generator };

/// Max over every parameter and every loss family (each class for the
/// adversarial ones) of |g - g_fd| / max(1e-8, |g| + |g_fd|), with g_fd a
/// central difference of step `epsilon`. Batches are indexed by class.
double grad_check(const AlignmentModel &model, const std::vector<PairedBatch> &batches, double epsilon);

/// Central-difference relative error of `analytic` against `loss` over every
/// coordinate of `params`.
double finite_difference_error(const std::function<double()> &loss, std::vector<double *> params,
                               const std::vector<double> &analytic, double epsilon);

/// Checkpoint with feature names so translated output can be written as a bundle.
struct AlignmentCheckpoint {
    AlignmentModel model;
    std::vector<std::string> atac_features;
    std::vector<std::string> rna_features;
};

void save_checkpoint(const AlignmentCheckpoint &checkpoint, const std::filesystem::path &file);
AlignmentCheckpoint load_checkpoint(const std::filesystem::path &file);

/// Dense feature x cell view of a bundle's matrix.
MatrixXd dense_columns(const ExpressionMatrix &matrix);

} // namespace scbench
