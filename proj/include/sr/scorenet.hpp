#ifndef SR_SCORENET_HPP
#define SR_SCORENET_HPP

#include <memory>
#include <vector>

#include "sr/rng.hpp"
#include "sr/scoremodel.hpp"

namespace sr {

/// Convolutional score network: U-Net style with residual blocks, skip
/// concatenation, binomial-filter down/upsampling and Gaussian-Fourier
/// sigma conditioning added as a per-channel bias in each residual block.
/// The layer layout matches net_layer_specs(cfg) exactly, so the theoretical
/// receptive field of the d=1 variant is 49 pixels.
class ScoreNet final : public ScoreModel {
  public:
    /// Opaque record of forward-pass activations, consumed by backward().
    struct Tape {
        struct Impl;
        std::unique_ptr<Impl> impl;
        Tape();
        ~Tape();
    };
    struct Slices; // opaque parameter layout, shared by forward and backward

    /// Builds the network and initializes parameters from rng.
    /// rows/cols are nominal evaluation dims; any size divisible by
    /// 2^(depth-1) is accepted at evaluation time.
    ScoreNet(NetConfig cfg, std::size_t rows, std::size_t cols, RngState& rng);
    ~ScoreNet() override;

    Image evaluate(const Image& x, double sigma) const override;
    std::size_t rows() const override { return rows_; }
    std::size_t cols() const override { return cols_; }

    const NetConfig& config() const { return cfg_; }
    std::size_t param_count() const { return params_.size(); }
    const std::vector<double>& params() const { return params_; }
    void set_params(const std::vector<double>& p);
    const std::vector<double>& fourier_freqs() const { return fourier_freqs_; }
    void set_fourier_freqs(const std::vector<double>& f);

    /// Forward pass; when tape != nullptr the activations needed for
    /// backpropagation are retained in it.
    Image forward(const Image& x, double sigma, std::unique_ptr<Tape>* tape) const;
    /// Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
    void backward(Tape& tape, const Image& out_grad, std::vector<double>& grad) const;

  private:
    NetConfig cfg_;
    std::size_t rows_, cols_;
    std::vector<double> params_;
    std::vector<double> fourier_freqs_; // fixed, not trained
    std::unique_ptr<Slices> slices_;
};

} // namespace sr

#endif
