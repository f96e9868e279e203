#include "scbench/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "scbench/error.hpp"

namespace scbench {
namespace {

constexpr double kLeakySlope = 0.01;

double leaky(double z) { return z > 0.0 ? z : kLeakySlope * z; }
double leaky_slope(double z) { return z > 0.0 ? 1.0 : kLeakySlope; }

struct MlpCache {
    MatrixXd in;
    MatrixXd z1;
    MatrixXd a1;
};

MatrixXd forward(const Mlp &m, const MatrixXd &in, MlpCache *cache = nullptr) {
    MatrixXd z1 = (m.l1.W * in).colwise() + m.l1.b.col(0);
    MatrixXd a1 = z1.unaryExpr(&leaky);
    MatrixXd out = (m.l2.W * a1).colwise() + m.l2.b.col(0);
    if (cache) {
        cache->in = in;
        cache->z1 = std::move(z1);
        cache->a1 = std::move(a1);
    }
    return out;
}

// Accumulates parameter gradients into `g` (when given) and returns d(loss)/d(in).
MatrixXd backward(const Mlp &m, const MlpCache &c, const MatrixXd &dout, Mlp *g) {
    const MatrixXd da1 = m.l2.W.transpose() * dout;
    const MatrixXd dz1 = (da1.array() * c.z1.unaryExpr(&leaky_slope).array()).matrix();
    if (g) {
        g->l2.W += dout * c.a1.transpose();
        g->l2.b += dout.rowwise().sum();
        g->l1.W += dz1 * c.in.transpose();
        g->l1.b += dz1.rowwise().sum();
    }
    return m.l1.W.transpose() * dz1;
}

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

bool clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// Mean over the batch of -log D (target real) or -log(1 - D) (target fake),
// with D = clamp(sigmoid(logit)). Writes scale * d/dlogit into `dlogit`.
double adversarial_term(const MatrixXd &logits, bool real, double scale, MatrixXd &dlogit) {
    const double n = static_cast<double>(logits.cols());
    dlogit.resize(1, logits.cols());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.cols(); ++i) {
        const double p = sigmoid(logits(0, i));
        const double pc = clamp_prob(p);
        sum += real ? -std::log(pc) : -std::log(1.0 - pc);
        const double d = clamped(p) ? 0.0 : (real ? p - 1.0 : p);
        dlogit(0, i) = scale * d / n;
    }
    return sum / n;
}

// Mean over cells of the per-cell mean squared difference; gradient w.r.t. `a`.
double mse(const MatrixXd &a, const MatrixXd &b, double scale, MatrixXd &da) {
    const MatrixXd diff = a - b;
    const double denom = static_cast<double>(a.rows() * a.cols());
    da = diff * (2.0 * scale / denom);
    return diff.squaredNorm() / denom;
}

struct Encoded {
    MlpCache enc_a;
    MlpCache enc_r;
    MatrixXd h_a;
    MatrixXd h_r;
};

void check_batch(const AlignmentModel &model, const PairedBatch &batch) {
    if (batch.x.cols() == 0) throw InvalidArgument("empty alignment batch");
    if (batch.x.cols() != batch.y.cols()) throw InvalidArgument("alignment batch has unpaired columns");
    if (static_cast<std::size_t>(batch.x.rows()) != model.dims.d_a ||
        static_cast<std::size_t>(batch.y.rows()) != model.dims.d_r)
        throw InvalidArgument("alignment batch does not match the model dimensions");
}

Encoded encode(const AlignmentModel &model, const PairedBatch &batch) {
    Encoded e;
    e.h_a = forward(model.enc_a, embed_atac(model, batch.x), &e.enc_a);
    e.h_r = forward(model.enc_r, model.emb_r * batch.y, &e.enc_r);
    return e;
}

void encode_backward(const AlignmentModel &model, const PairedBatch &batch, const Encoded &e, const MatrixXd &dh_a,
                     const MatrixXd &dh_r, AlignmentModel &grad) {
    const MatrixXd d_emb_a = backward(model.enc_a, e.enc_a, dh_a, &grad.enc_a);
    grad.emb_a1 += d_emb_a * batch.x.transpose();
    grad.emb_a0 += d_emb_a * (1.0 - batch.x.array()).matrix().transpose();
    const MatrixXd d_emb_r = backward(model.enc_r, e.enc_r, dh_r, &grad.enc_r);
    grad.emb_r += d_emb_r * batch.y.transpose();
}

void check_class(const AlignmentModel &model, std::size_t k) {
    if (k >= model.disc_a.size()) throw InvalidArgument("class index " + std::to_string(k) + " out of range");
}

Mlp make_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto layer = [&](std::size_t fan_in, std::size_t fan_out) {
        Linear l;
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        l.W = MatrixXd::NullaryExpr(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in),
                                    [&]() { return s * normal(rng); });
        l.b = MatrixXd::Zero(static_cast<Eigen::Index>(fan_out), 1);
        return l;
    };
    Mlp m;
    m.l1 = layer(in, hidden);
    m.l2 = layer(hidden, out);
    return m;
}

} // namespace

void AlignmentDims::validate() const {
    if (d_a == 0 || d_r == 0 || d_h == 0 || d_h_in == 0 || n_classes == 0)
        throw InvalidArgument("alignment dimensions must all be positive");
}

std::size_t AlignmentModel::parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string &, const MatrixXd &m, bool) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

AlignmentModel init_model(const AlignmentDims &dims, double gamma, std::uint64_t seed) {
    dims.validate();
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be finite and non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto rows = static_cast<Eigen::Index>(dims.d_h_in);
    const double sa = 1.0 / std::sqrt(static_cast<double>(dims.d_a));
    const double sr = 1.0 / std::sqrt(static_cast<double>(dims.d_r));

    AlignmentModel m;
    m.dims = dims;
    m.gamma = gamma;
    m.emb_a0 = MatrixXd::NullaryExpr(rows, static_cast<Eigen::Index>(dims.d_a), [&]() { return sa * normal(rng); });
    m.emb_a1 = MatrixXd::NullaryExpr(rows, static_cast<Eigen::Index>(dims.d_a), [&]() { return sa * normal(rng); });
    m.emb_r = MatrixXd::NullaryExpr(rows, static_cast<Eigen::Index>(dims.d_r), [&]() { return sr * normal(rng); });
    const std::size_t wide = 2 * dims.d_h;
    m.enc_a = make_mlp(dims.d_h_in, wide, dims.d_h, rng);
    m.enc_r = make_mlp(dims.d_h_in, wide, dims.d_h, rng);
    m.dec_a = make_mlp(dims.d_h, wide, dims.d_a, rng);
    m.dec_r = make_mlp(dims.d_h, wide, dims.d_r, rng);
    m.map_ar = make_mlp(dims.d_h, wide, dims.d_h, rng);
    m.map_ra = make_mlp(dims.d_h, wide, dims.d_h, rng);
    for (std::size_t k = 0; k < dims.n_classes; ++k) {
        m.disc_a.push_back(make_mlp(dims.d_h, dims.d_h, 1, rng));
        m.disc_r.push_back(make_mlp(dims.d_h, dims.d_h, 1, rng));
    }
    return m;
}

AlignmentModel zeros_like(const AlignmentModel &model) {
    AlignmentModel z = model;
    z.visit([](const std::string &, MatrixXd &m, bool) { m.setZero(); });
    return z;
}

MatrixXd embed_atac(const AlignmentModel &model, const MatrixXd &x) {
    if (static_cast<std::size_t>(x.rows()) != model.dims.d_a)
        throw InvalidArgument("accessibility input has " + std::to_string(x.rows()) + " rows, model expects " +
                              std::to_string(model.dims.d_a));
    return model.emb_a1 * x + model.emb_a0 * (1.0 - x.array()).matrix();
}

MatrixXd encode_atac(const AlignmentModel &model, const MatrixXd &x) { return forward(model.enc_a, embed_atac(model, x)); }

MatrixXd encode_rna(const AlignmentModel &model, const MatrixXd &y) {
    if (static_cast<std::size_t>(y.rows()) != model.dims.d_r)
        throw InvalidArgument("expression input has " + std::to_string(y.rows()) + " rows, model expects " +
                              std::to_string(model.dims.d_r));
    return forward(model.enc_r, model.emb_r * y);
}

MatrixXd translate(const AlignmentModel &model, const MatrixXd &x) {
    return forward(model.dec_r, forward(model.map_ar, encode_atac(model, x)));
}

double reconstruction_loss(const AlignmentModel &model, const PairedBatch &batch, AlignmentModel *grad,
                           double scale) {
    check_batch(model, batch);
    const Encoded e = encode(model, batch);
    MlpCache c_dec_a, c_dec_r;
    const MatrixXd logits = forward(model.dec_a, e.h_a, &c_dec_a);
    const MatrixXd y_hat = forward(model.dec_r, e.h_r, &c_dec_r);

    const double denom = static_cast<double>(logits.size());
    MatrixXd d_logits(logits.rows(), logits.cols());
    double bce = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const double p = sigmoid(logits(i, j));
            const double pc = clamp_prob(p);
            const double x = batch.x(i, j);
            bce -= x * std::log(pc) + (1.0 - x) * std::log(1.0 - pc);
            d_logits(i, j) = clamped(p) ? 0.0 : scale * (p - x) / denom;
        }
    }
    bce /= denom;
    MatrixXd d_y_hat;
    const double rec_r = mse(y_hat, batch.y, scale, d_y_hat);

    if (grad) {
        const MatrixXd dh_a = backward(model.dec_a, c_dec_a, d_logits, &grad->dec_a);
        const MatrixXd dh_r = backward(model.dec_r, c_dec_r, d_y_hat, &grad->dec_r);
        encode_backward(model, batch, e, dh_a, dh_r, *grad);
    }
    return bce + rec_r;
}

double discriminator_loss(const AlignmentModel &model, const PairedBatch &batch, std::size_t k, AlignmentModel *grad,
                          double scale) {
    check_batch(model, batch);
    check_class(model, k);
    const Encoded e = encode(model, batch);
    MlpCache c_ra, c_ar, c_da_real, c_da_fake, c_dr_real, c_dr_fake;
    const MatrixXd ht_a = forward(model.map_ra, e.h_r, &c_ra);
    const MatrixXd ht_r = forward(model.map_ar, e.h_a, &c_ar);

    MatrixXd g_da_real, g_da_fake, g_dr_real, g_dr_fake;
    double loss = 0.0;
    loss += adversarial_term(forward(model.disc_a[k], e.h_a, &c_da_real), true, scale, g_da_real);
    loss += adversarial_term(forward(model.disc_a[k], ht_a, &c_da_fake), false, scale, g_da_fake);
    loss += adversarial_term(forward(model.disc_r[k], e.h_r, &c_dr_real), true, scale, g_dr_real);
    loss += adversarial_term(forward(model.disc_r[k], ht_r, &c_dr_fake), false, scale, g_dr_fake);

    if (grad) {
        MatrixXd dh_a = backward(model.disc_a[k], c_da_real, g_da_real, &grad->disc_a[k]);
        const MatrixXd dht_a = backward(model.disc_a[k], c_da_fake, g_da_fake, &grad->disc_a[k]);
        MatrixXd dh_r = backward(model.disc_r[k], c_dr_real, g_dr_real, &grad->disc_r[k]);
        const MatrixXd dht_r = backward(model.disc_r[k], c_dr_fake, g_dr_fake, &grad->disc_r[k]);
        dh_r += backward(model.map_ra, c_ra, dht_a, &grad->map_ra);
        dh_a += backward(model.map_ar, c_ar, dht_r, &grad->map_ar);
        encode_backward(model, batch, e, dh_a, dh_r, *grad);
    }
    return loss;
}

double generator_loss(const AlignmentModel &model, const PairedBatch &batch, std::size_t k, AlignmentModel *grad,
                      double scale) {
    check_batch(model, batch);
    check_class(model, k);
    const Encoded e = encode(model, batch);
    MlpCache c_ar, c_ra, c_cyc_a, c_cyc_r, c_dr, c_da;
    const MatrixXd ht_r = forward(model.map_ar, e.h_a, &c_ar);
    const MatrixXd ht_a = forward(model.map_ra, e.h_r, &c_ra);
    const MatrixXd cyc_a = forward(model.map_ra, ht_r, &c_cyc_a);
    const MatrixXd cyc_r = forward(model.map_ar, ht_a, &c_cyc_r);

    MatrixXd g_dr, g_da, d_cyc_a, d_cyc_r;
    double loss = 0.0;
    loss += adversarial_term(forward(model.disc_r[k], ht_r, &c_dr), true, scale, g_dr);
    loss += mse(cyc_a, e.h_a, scale, d_cyc_a);
    loss += adversarial_term(forward(model.disc_a[k], ht_a, &c_da), true, scale, g_da);
    loss += mse(cyc_r, e.h_r, scale, d_cyc_r);

    if (grad) {
        MatrixXd dht_r = backward(model.disc_r[k], c_dr, g_dr, &grad->disc_r[k]);
        dht_r += backward(model.map_ra, c_cyc_a, d_cyc_a, &grad->map_ra);
        MatrixXd dht_a = backward(model.disc_a[k], c_da, g_da, &grad->disc_a[k]);
        dht_a += backward(model.map_ar, c_cyc_r, d_cyc_r, &grad->map_ar);

        MatrixXd dh_a = -d_cyc_a;
        dh_a += backward(model.map_ar, c_ar, dht_r, &grad->map_ar);
        MatrixXd dh_r = -d_cyc_r;
        dh_r += backward(model.map_ra, c_ra, dht_a, &grad->map_ra);
        encode_backward(model, batch, e, dh_a, dh_r, *grad);
    }
    return loss;
}

std::vector<std::size_t> tfidf_select(const ExpressionMatrix &peaks, std::size_t n_keep) {
    if (peaks.layout() != Layout::binary) throw InvalidArgument("peak selection needs a binary matrix");
    if (n_keep > peaks.n_genes())
        throw InvalidArgument("cannot keep " + std::to_string(n_keep) + " of " + std::to_string(peaks.n_genes()) +
                              " peaks");
    if (peaks.entries().empty()) throw InvalidArgument("peak matrix is all zero");

    const auto totals = peaks.row_sums();
    std::vector<std::vector<double>> tf(peaks.n_genes());
    for (const auto &e : peaks.entries()) tf[e.gene].push_back(e.value / totals[e.cell]);

    const double n_cells = static_cast<double>(peaks.n_cells());
    std::vector<double> score(peaks.n_genes(), 0.0);
    for (std::size_t j = 0; j < tf.size(); ++j) {
        // Summing in sorted order keeps the score independent of cell order.
        std::sort(tf[j].begin(), tf[j].end());
        double sum = 0.0;
        for (double v : tf[j]) sum += v;
        score[j] = sum * std::log(n_cells / (1.0 + static_cast<double>(tf[j].size())));
    }

    std::vector<std::size_t> order(peaks.n_genes());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    order.resize(n_keep);
    std::sort(order.begin(), order.end());
    return order;
}

MarkerR2 marker_r2(const MatrixXd &predicted, const MatrixXd &observed, const std::vector<std::size_t> &labels,
                   const std::vector<std::size_t> &markers) {
    if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols())
        throw InvalidArgument("predicted and observed matrices differ in shape");
    if (labels.size() != static_cast<std::size_t>(observed.rows()))
        throw InvalidArgument("one label per cell is required");

    std::map<std::size_t, std::vector<Eigen::Index>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Eigen::Index>(i));

    MarkerR2 out;
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t g : markers) {
        if (g >= static_cast<std::size_t>(observed.cols())) throw InvalidArgument("marker column out of range");
        const auto col = static_cast<Eigen::Index>(g);
        std::vector<double> obs_mean, pred_mean;
        for (const auto &[label, rows] : members) {
            double o = 0.0, p = 0.0;
            for (auto r : rows) {
                o += observed(r, col);
                p += predicted(r, col);
            }
            obs_mean.push_back(o / static_cast<double>(rows.size()));
            pred_mean.push_back(p / static_cast<double>(rows.size()));
        }
        double grand = 0.0;
        for (double v : obs_mean) grand += v;
        grand /= static_cast<double>(obs_mean.size());
        double ss_tot = 0.0, ss_res = 0.0;
        for (std::size_t k = 0; k < obs_mean.size(); ++k) {
            ss_tot += (obs_mean[k] - grand) * (obs_mean[k] - grand);
            ss_res += (obs_mean[k] - pred_mean[k]) * (obs_mean[k] - pred_mean[k]);
        }
        if (ss_tot == 0.0) {
            out.per_marker.push_back(std::nullopt);
            continue;
        }
        const double r2 = 1.0 - ss_res / ss_tot;
        out.per_marker.push_back(r2);
        sum += r2;
        ++defined;
    }
    out.mean = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

double finite_difference_error(const std::function<double()> &loss, std::vector<double *> params,
                               const std::vector<double> &analytic, double epsilon) {
    if (params.size() != analytic.size()) throw InvalidArgument("gradient and parameter counts differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double &p = *params[i];
        const double saved = p;
        p = saved + epsilon;
        const double up = loss();
        p = saved - epsilon;
        const double down = loss();
        p = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double rel = std::fabs(analytic[i] - fd) / std::max(1e-8, std::fabs(analytic[i]) + std::fabs(fd));
        worst = std::max(worst, rel);
    }
    return worst;
}

double grad_check(const AlignmentModel &model, const std::vector<PairedBatch> &batches, double epsilon) {
    if (batches.size() != model.dims.n_classes) throw InvalidArgument("grad_check needs one batch per class");
    AlignmentModel work = model;
    std::vector<double *> params;
    work.visit([&](const std::string &, MatrixXd &m, bool) {
        for (Eigen::Index i = 0; i < m.size(); ++i) params.push_back(m.data() + i);
    });

    const auto check = [&](const std::function<double(const AlignmentModel &, AlignmentModel *)> &family) {
        AlignmentModel grad = zeros_like(work);
        family(work, &grad);
        std::vector<double> analytic;
        grad.visit([&](const std::string &, const MatrixXd &m, bool) {
            for (Eigen::Index i = 0; i < m.size(); ++i) analytic.push_back(m.data()[i]);
        });
        return finite_difference_error([&]() { return family(work, nullptr); }, params, analytic, epsilon);
    };

    PairedBatch all;
    {
        Eigen::Index cols = 0;
        for (const auto &b : batches) cols += b.x.cols();
        all.x.resize(static_cast<Eigen::Index>(model.dims.d_a), cols);
        all.y.resize(static_cast<Eigen::Index>(model.dims.d_r), cols);
        Eigen::Index at = 0;
        for (const auto &b : batches) {
            all.x.middleCols(at, b.x.cols()) = b.x;
            all.y.middleCols(at, b.y.cols()) = b.y;
            at += b.x.cols();
        }
    }

    double worst = check([&](const AlignmentModel &m, AlignmentModel *g) { return reconstruction_loss(m, all, g); });
    for (std::size_t k = 0; k < batches.size(); ++k) {
        worst = std::max(worst, check([&](const AlignmentModel &m, AlignmentModel *g) {
                             return discriminator_loss(m, batches[k], k, g);
                         }));
        worst = std::max(worst, check([&](const AlignmentModel &m, AlignmentModel *g) {
                             return generator_loss(m, batches[k], k, g);
                         }));
    }
    return worst;
}

MatrixXd dense_columns(const ExpressionMatrix &matrix) {
    MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(matrix.n_genes()), static_cast<Eigen::Index>(matrix.n_cells()));
    for (const auto &e : matrix.entries()) out(e.gene, e.cell) = e.value;
    return out;
}

} // namespace scbench
