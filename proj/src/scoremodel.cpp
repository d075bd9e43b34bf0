#include "sr/scoremodel.hpp"

#include <cmath>
#include <stdexcept>

namespace sr {

GaussianScoreModel::GaussianScoreModel(Image mu, Image var_diag)
    : mu_(std::move(mu)), diagonal_(true), var_diag_(std::move(var_diag)) {
    if (mu_.size() != var_diag_.size())
        throw std::invalid_argument("GaussianScoreModel: mean/variance size mismatch");
    for (double v : var_diag_.data)
        if (v <= 0.0) throw std::invalid_argument("GaussianScoreModel: variances must be positive");
}

GaussianScoreModel::GaussianScoreModel(Image mu, const Eigen::MatrixXd& cov)
    : mu_(std::move(mu)), diagonal_(false) {
    const auto n = static_cast<Eigen::Index>(mu_.size());
    if (cov.rows() != n || cov.cols() != n)
        throw std::invalid_argument("GaussianScoreModel: covariance dimension mismatch");
    if (!cov.isApprox(cov.transpose(), 1e-10))
        throw std::invalid_argument("GaussianScoreModel: covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    eigval_ = es.eigenvalues();
    eigvec_ = es.eigenvectors();
    if (eigval_.minCoeff() <= 0.0)
        throw std::invalid_argument("GaussianScoreModel: covariance must be positive definite");
}

Image GaussianScoreModel::evaluate(const Image& x, double sigma) const {
    if (x.rows != mu_.rows || x.cols != mu_.cols)
        throw std::invalid_argument("GaussianScoreModel: input dimension mismatch");
    const double s2 = sigma * sigma;
    Image out(x.rows, x.cols);
    if (diagonal_) {
        for (std::size_t i = 0; i < x.size(); ++i)
            out.data[i] = -(x.data[i] - mu_.data[i]) / (var_diag_.data[i] + s2);
        return out;
    }
    Eigen::Map<const Eigen::VectorXd> xv(x.data.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::Map<const Eigen::VectorXd> mv(mu_.data.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd c = eigvec_.transpose() * (xv - mv);
    c.array() /= (eigval_.array() + s2);
    Eigen::Map<Eigen::VectorXd>(out.data.data(), static_cast<Eigen::Index>(out.size())) =
        -(eigvec_ * c);
    return out;
}

double GaussianScoreModel::log_density(const Image& x, double sigma) const {
    const double s2 = sigma * sigma;
    const auto n = static_cast<double>(x.size());
    double quad = 0.0, logdet = 0.0;
    if (diagonal_) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = var_diag_.data[i] + s2;
            const double d = x.data[i] - mu_.data[i];
            quad += d * d / v;
            logdet += std::log(v);
        }
    } else {
        Eigen::Map<const Eigen::VectorXd> xv(x.data.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::Map<const Eigen::VectorXd> mv(mu_.data.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::VectorXd c = eigvec_.transpose() * (xv - mv);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double v = eigval_[i] + s2;
            quad += c[i] * c[i] / v;
            logdet += std::log(v);
        }
    }
    return -0.5 * (quad + logdet + n * std::log(2.0 * M_PI));
}

Eigen::MatrixXd GaussianScoreModel::covariance() const {
    if (diagonal_) {
        const auto n = static_cast<Eigen::Index>(mu_.size());
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) cov(i, i) = var_diag_.data[static_cast<std::size_t>(i)];
        return cov;
    }
    return eigvec_ * eigval_.asDiagonal() * eigvec_.transpose();
}

std::size_t receptive_field(const std::vector<LayerSpec>& layers) {
    if (layers.empty()) throw std::invalid_argument("receptive_field: empty layer list");
    std::size_t r = 1;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (it->kernel < 1 || it->stride < 1)
            throw std::invalid_argument("receptive_field: kernel and stride must be >= 1");
        r = it->stride * r + (it->kernel - it->stride);
    }
    return r;
}

void NetConfig::validate() const {
    if (depth < 1 || depth > 4)
        throw std::invalid_argument("NetConfig: depth must be in 1..4");
    if (attention && depth != 4)
        throw std::invalid_argument("NetConfig: attention is permitted only when depth == 4");
    if (base_channels == 0 || deep_channels == 0 || blocks_per_stage == 0)
        throw std::invalid_argument("NetConfig: channel and block counts must be positive");
}

std::vector<LayerSpec> net_layer_specs(const NetConfig& cfg) {
    cfg.validate();
    std::vector<LayerSpec> layers;
    auto conv = [&](std::size_t k, std::size_t scale) {
        layers.push_back({(k - 1) * scale + 1, 1});
    };
    const std::size_t b = cfg.blocks_per_stage;
    conv(3, 1); // input 3x3
    // Encoder stages: b residual blocks (2 convs each), then the down block:
    // conv3 at the fine scale, binomial blur-pool (k=3, stride 2), conv3 coarse.
    for (std::size_t j = 1; j + 1 <= cfg.depth; ++j) {
        const std::size_t s = std::size_t{1} << (j - 1);
        for (std::size_t r = 0; r < 2 * b; ++r) conv(3, s);
        conv(3, s);
        conv(3, s);
        conv(3, 2 * s);
    }
    // Latent stack: 2b+3 residual blocks at the coarsest scale.
    const std::size_t sl = std::size_t{1} << (cfg.depth - 1);
    for (std::size_t r = 0; r < 2 * (2 * b + 3); ++r) conv(3, sl);
    // Decoder stages: up block (conv3 coarse, binomial blur after x2 upsample),
    // then b+1 residual blocks at the fine scale.
    for (std::size_t j = cfg.depth; j-- > 1;) {
        const std::size_t s = std::size_t{1} << (j - 1);
        conv(3, 2 * s);
        conv(3, s);
        for (std::size_t r = 0; r < 2 * (b + 1); ++r) conv(3, s);
    }
    conv(3, 1); // output 3x3
    conv(1, 1); // output 1x1
    return layers;
}

} // namespace sr
