#ifndef SR_SCOREMODEL_HPP
#define SR_SCOREMODEL_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <vector>

#include "sr/image.hpp"

namespace sr {

/// Score estimator s(x, sigma) ~ grad log p_sigma(x). Output dims = input dims.
class ScoreModel {
  public:
    virtual ~ScoreModel() = default;
    virtual Image evaluate(const Image& x, double sigma) const = 0;
    virtual std::size_t rows() const = 0;
    virtual std::size_t cols() const = 0;
};

/// Exact score of a Gaussian prior N(mu, Sigma): the sigma-smoothed density is
/// N(mu, Sigma + sigma^2 Id), whose score is -(Sigma + sigma^2 Id)^-1 (x - mu).
class GaussianScoreModel final : public ScoreModel {
  public:
    /// Diagonal covariance, one variance per pixel.
    GaussianScoreModel(Image mu, Image var_diag);
    /// Full covariance (n x n, symmetric positive definite).
    GaussianScoreModel(Image mu, const Eigen::MatrixXd& cov);

    Image evaluate(const Image& x, double sigma) const override;
    std::size_t rows() const override { return mu_.rows; }
    std::size_t cols() const override { return mu_.cols; }

    /// log N(x; mu, Sigma + sigma^2 Id), for gradient cross-checks.
    double log_density(const Image& x, double sigma) const;

    const Image& mean() const { return mu_; }
    /// Dense covariance (materialized for diagonal models too).
    Eigen::MatrixXd covariance() const;

  private:
    Image mu_;
    bool diagonal_;
    Image var_diag_;
    Eigen::VectorXd eigval_;
    Eigen::MatrixXd eigvec_;
};

/// One network layer as seen by the receptive-field recurrence.
struct LayerSpec {
    std::size_t kernel = 1;
    std::size_t stride = 1;
};

/// Fold r_{l-1} = s_l * r_l + (k_l - s_l) backwards from r_L = 1.
std::size_t receptive_field(const std::vector<LayerSpec>& layers);

/// Score network configuration; depth d = number of resolutions.
struct NetConfig {
    std::size_t depth = 1;            // 1..4
    std::size_t base_channels = 128;  // input/output resolution
    std::size_t deep_channels = 256;  // all coarser resolutions
    std::size_t blocks_per_stage = 4;
    bool attention = false;           // permitted only when depth == 4
    bool group_norm = false;          // optional GN(32); off keeps the net strictly local
    double fourier_scale = 16.0;
    std::size_t fourier_features = 16;

    void validate() const;
};

/// Resolution-normalized layer list of the network: each conv at scale s is
/// reported with its effective stride-1 kernel (k-1)*s + 1, so the recurrence
/// sees the receptive field in input-pixel units.
std::vector<LayerSpec> net_layer_specs(const NetConfig& cfg);

} // namespace sr

#endif
