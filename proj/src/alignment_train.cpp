#include <cmath>
#include <random>

#include "scbench/alignment.hpp"
#include "scbench/error.hpp"

namespace scbench {
namespace {

// Adam over the parameter blocks selected by `discriminators`.
class Adam {
  public:
    Adam(const AlignmentModel &shape, bool discriminators, const TrainConfig &cfg)
        : discriminators_(discriminators), cfg_(cfg) {
        shape.visit([&](const std::string &, const MatrixXd &m, bool disc) {
            if (disc != discriminators_) return;
            m_.push_back(MatrixXd::Zero(m.rows(), m.cols()));
            v_.push_back(MatrixXd::Zero(m.rows(), m.cols()));
        });
    }

    void step(AlignmentModel &model, const AlignmentModel &grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        std::vector<const MatrixXd *> grads;
        grad.visit([&](const std::string &, const MatrixXd &g, bool disc) {
            if (disc == discriminators_) grads.push_back(&g);
        });
        std::size_t i = 0;
        model.visit([&](const std::string &, MatrixXd &p, bool disc) {
            if (disc != discriminators_) return;
            const MatrixXd &g = *grads[i];
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            p.array() -= cfg_.step_size * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.adam_eps);
            ++i;
        });
    }

  private:
    bool discriminators_;
    const TrainConfig &cfg_;
    std::vector<MatrixXd> m_;
    std::vector<MatrixXd> v_;
    long t_ = 0;
};

class BatchSampler {
  public:
    BatchSampler(const std::vector<PairedCell> &data, const AlignmentDims &dims, std::size_t batch_size,
                 std::uint64_t seed)
        : data_(data), dims_(dims), batch_size_(batch_size), rng_(seed), members_(dims.n_classes) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto &c = data[i];
            if (c.label >= dims.n_classes) throw InvalidArgument("cell label outside the model's classes");
            if (static_cast<std::size_t>(c.atac.size()) != dims.d_a || static_cast<std::size_t>(c.rna.size()) != dims.d_r)
                throw InvalidArgument("paired cell does not match the model dimensions");
            members_[c.label].push_back(i);
        }
        for (std::size_t k = 0; k < members_.size(); ++k) {
            if (!members_[k].empty()) present_.push_back(k);
        }
        if (present_.empty()) throw InvalidArgument("no paired cells to train on");
    }

    const std::vector<std::size_t> &classes() const { return present_; }

    /// One batch per present class, in the order of classes().
    std::vector<PairedBatch> draw() {
        std::vector<PairedBatch> out;
        for (std::size_t k : present_) {
            const auto &pool = members_[k];
            const std::size_t n = batch_size_ == 0 ? pool.size() : batch_size_;
            PairedBatch b;
            b.x.resize(static_cast<Eigen::Index>(dims_.d_a), static_cast<Eigen::Index>(n));
            b.y.resize(static_cast<Eigen::Index>(dims_.d_r), static_cast<Eigen::Index>(n));
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            for (std::size_t j = 0; j < n; ++j) {
                const auto &cell = data_[batch_size_ == 0 ? pool[j] : pool[pick(rng_)]];
                b.x.col(static_cast<Eigen::Index>(j)) = cell.atac;
                b.y.col(static_cast<Eigen::Index>(j)) = cell.rna;
            }
            out.push_back(std::move(b));
        }
        return out;
    }

  private:
    const std::vector<PairedCell> &data_;
    AlignmentDims dims_;
    std::size_t batch_size_;
    std::mt19937_64 rng_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::size_t> present_;
};

PairedBatch concat(const std::vector<PairedBatch> &batches) {
    Eigen::Index cols = 0;
    for (const auto &b : batches) cols += b.x.cols();
    PairedBatch all;
    all.x.resize(batches.front().x.rows(), cols);
    all.y.resize(batches.front().y.rows(), cols);
    Eigen::Index at = 0;
    for (const auto &b : batches) {
        all.x.middleCols(at, b.x.cols()) = b.x;
        all.y.middleCols(at, b.y.cols()) = b.y;
        at += b.x.cols();
    }
    return all;
}

void guard(double value, std::size_t step, const char *what) {
    if (!std::isfinite(value))
        throw NumericalError(std::string(what) + " loss became non-finite at step " + std::to_string(step));
}

} // namespace

void TrainConfig::validate() const {
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ConfigError("step_size must be finite and >= 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and >= 0");
    if (disc_steps == 0) throw ConfigError("disc_steps must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

TrainResult train(AlignmentModel model, const std::vector<PairedCell> &data, const TrainConfig &cfg,
                  const std::function<void(std::size_t, const StepLoss &)> &progress) {
    cfg.validate();
    model.gamma = cfg.gamma;
    BatchSampler sampler(data, model.dims, cfg.batch_size, cfg.seed);
    Adam disc_opt(model, true, cfg);
    Adam gen_opt(model, false, cfg);
    const double n_classes = static_cast<double>(sampler.classes().size());

    TrainResult result;
    result.history.reserve(cfg.steps);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        StepLoss loss;
        for (std::size_t d = 0; d < cfg.disc_steps; ++d) {
            const auto batches = sampler.draw();
            AlignmentModel grad = zeros_like(model);
            loss.discriminator = 0.0;
            for (std::size_t i = 0; i < batches.size(); ++i)
                loss.discriminator +=
                    discriminator_loss(model, batches[i], sampler.classes()[i], &grad, 1.0 / n_classes) / n_classes;
            guard(loss.discriminator, step, "discriminator");
            disc_opt.step(model, grad);
        }

        const auto batches = sampler.draw();
        AlignmentModel grad = zeros_like(model);
        loss.reconstruction = reconstruction_loss(model, concat(batches), &grad);
        for (std::size_t i = 0; i < batches.size(); ++i)
            loss.generator +=
                generator_loss(model, batches[i], sampler.classes()[i], &grad, cfg.gamma / n_classes) / n_classes;
        guard(loss.reconstruction, step, "reconstruction");
        guard(loss.generator, step, "generator");
        gen_opt.step(model, grad);

        result.history.push_back(loss);
        if (progress) progress(step, loss);
    }
    result.model = std::move(model);
    return result;
}

} // namespace scbench
