#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tcmot {

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Feed-forward embedding shared by both branches of the Siamese pair.
/// Hidden layers use ReLU; the output layer is linear.
class EmbeddingNet {
public:
    EmbeddingNet() = default;
    explicit EmbeddingNet(std::vector<DenseLayer> layers);

    EmbeddingNet(const EmbeddingNet& other);
    EmbeddingNet& operator=(const EmbeddingNet& other);
    EmbeddingNet(EmbeddingNet&&) noexcept = default;
    EmbeddingNet& operator=(EmbeddingNet&&) noexcept = default;

    /// Uniform init in [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases zero.
    /// `dims` lists every layer width from input to output.
    static EmbeddingNet initialized(std::span<const int> dims, std::uint64_t seed);
    /// Single linear layer with W = I, b = 0.
    static EmbeddingNet identity(int dim);

    int d_in() const;
    int d_emb() const;
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::uint64_t tag() const { return tag_; }

    /// Forward pass without keeping activations.
    Eigen::VectorXd embed(const Eigen::VectorXd& raw) const;

    /// In-place parameter update `p -= beta * g`.
    void apply_gradient(const std::vector<DenseLayer>& grads, double beta);

    bool operator==(const EmbeddingNet& other) const;

private:
    void retag();

    std::vector<DenseLayer> layers_;
    std::uint64_t tag_ = 0;
};

using NetGradients = std::vector<DenseLayer>;

struct ForwardCache {
    std::uint64_t net_tag = 0;
    std::vector<Eigen::VectorXd> inputs;      // input of each layer
    std::vector<Eigen::VectorXd> pre_active;  // affine output of each layer
};

struct ForwardResult {
    Eigen::VectorXd output;
    ForwardCache cache;
};

ForwardResult forward(const EmbeddingNet& net, const Eigen::VectorXd& raw);

/// Parameter gradients given dLoss/dOutput. Throws InputError if `cache` came
/// from a different network or from before the last parameter update.
NetGradients backward(const EmbeddingNet& net, const ForwardCache& cache, const Eigen::VectorXd& output_gradient);

EmbeddingNet sgd_step(EmbeddingNet net, const NetGradients& grads, double beta);

NetGradients zero_gradients(const EmbeddingNet& net);
void accumulate(NetGradients& into, const NetGradients& add, double scale = 1.0);

/// Hinge argument g = b - l * (1 - d), d the squared Mahalanobis distance under `m_tot`.
double hinge_argument(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, int label,
                      const Eigen::MatrixXd& m_tot, double margin_b);

/// Combined input gradient of the weighted pair loss C*h:
/// 2 C l (M + M^T)(x_i - x_j) when g > 0, else zero. Equals dL/dx_i - dL/dx_j.
Eigen::VectorXd pair_input_gradient(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, int label,
                                    const Eigen::MatrixXd& m_tot, double margin_b, double c_weight);

struct SiameseGradient {
    double loss = 0.0;  // C * h for the pair
    NetGradients grads;
};

/// Runs both branches on raw inputs, splits the combined input gradient between
/// them (+1/2 for branch a, -1/2 for branch b), and sums the parameter gradients.
SiameseGradient siamese_gradient(const EmbeddingNet& net, const Eigen::VectorXd& raw_a,
                                 const Eigen::VectorXd& raw_b, int label, const Eigen::MatrixXd& m_tot,
                                 double margin_b, double c_weight);

void write_net(std::ostream& os, const EmbeddingNet& net);
EmbeddingNet read_net(std::istream& is);
void save_net_file(const std::string& path, const EmbeddingNet& net);
EmbeddingNet load_net_file(const std::string& path);

}  // namespace tcmot
