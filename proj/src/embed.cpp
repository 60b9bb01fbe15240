#include "tcmot/embed.hpp"

#include "tcmot/core.hpp"
#include "tcmot/random.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace tcmot {
namespace {

std::atomic<std::uint64_t> next_tag{1};

constexpr const char* kNetMagic = "tcmot-net";
constexpr int kNetVersion = 1;

Eigen::VectorXd relu(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }

}  // namespace

EmbeddingNet::EmbeddingNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InputError("embedding net needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.bias.size() != l.weight.rows()) throw InputError("layer bias does not match weight rows");
        if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
            throw InputError("layer " + std::to_string(i) + " input width does not chain");
        }
        if (!l.weight.allFinite() || !l.bias.allFinite()) throw InputError("non-finite network parameter");
    }
    retag();
}

EmbeddingNet::EmbeddingNet(const EmbeddingNet& other) : layers_(other.layers_) { retag(); }

EmbeddingNet& EmbeddingNet::operator=(const EmbeddingNet& other) {
    if (this != &other) {
        layers_ = other.layers_;
        retag();
    }
    return *this;
}

void EmbeddingNet::retag() { tag_ = next_tag.fetch_add(1); }

EmbeddingNet EmbeddingNet::initialized(std::span<const int> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw InputError("embedding net needs input and output widths");
    Rng rng = make_stream(seed, "embed-init");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const int fan_in = dims[i];
        const int fan_out = dims[i + 1];
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-s, s);
        DenseLayer l{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        // Row-major fill so the draw order is independent of Eigen's storage order.
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) l.weight(r, c) = dist(rng);
        }
        layers.push_back(std::move(l));
    }
    return EmbeddingNet(std::move(layers));
}

EmbeddingNet EmbeddingNet::identity(int dim) {
    return EmbeddingNet({DenseLayer{Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)}});
}

int EmbeddingNet::d_in() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int EmbeddingNet::d_emb() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

Eigen::VectorXd EmbeddingNet::embed(const Eigen::VectorXd& raw) const { return forward(*this, raw).output; }

void EmbeddingNet::apply_gradient(const std::vector<DenseLayer>& grads, double beta) {
    if (grads.size() != layers_.size()) throw InputError("gradient layer count does not match net");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (grads[i].weight.rows() != layers_[i].weight.rows() || grads[i].weight.cols() != layers_[i].weight.cols() ||
            grads[i].bias.size() != layers_[i].bias.size()) {
            throw InputError("gradient shape does not match layer " + std::to_string(i));
        }
        layers_[i].weight -= beta * grads[i].weight;
        layers_[i].bias -= beta * grads[i].bias;
    }
    retag();
}

bool EmbeddingNet::operator==(const EmbeddingNet& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()) return false;
        if (a.weight != b.weight || a.bias != b.bias) return false;
    }
    return true;
}

ForwardResult forward(const EmbeddingNet& net, const Eigen::VectorXd& raw) {
    if (raw.size() != net.d_in()) {
        throw InputError("feature dimension " + std::to_string(raw.size()) + " does not match net input " +
                         std::to_string(net.d_in()));
    }
    ForwardResult res;
    res.cache.net_tag = net.tag();
    const auto& layers = net.layers();
    Eigen::VectorXd x = raw;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        res.cache.inputs.push_back(x);
        Eigen::VectorXd z = layers[i].weight * x + layers[i].bias;
        res.cache.pre_active.push_back(z);
        x = (i + 1 < layers.size()) ? relu(z) : z;
    }
    res.output = std::move(x);
    return res;
}

NetGradients backward(const EmbeddingNet& net, const ForwardCache& cache, const Eigen::VectorXd& output_gradient) {
    const auto& layers = net.layers();
    if (cache.net_tag != net.tag() || cache.inputs.size() != layers.size()) {
        throw InputError("forward cache is stale or belongs to another network");
    }
    if (output_gradient.size() != net.d_emb()) throw InputError("output gradient has wrong dimension");

    NetGradients grads(layers.size());
    Eigen::VectorXd delta = output_gradient;
    for (std::size_t k = layers.size(); k-- > 0;) {
        if (k + 1 < layers.size()) {
            // ReLU gate; the derivative at exactly zero is taken as zero.
            delta = (cache.pre_active[k].array() > 0.0).select(delta, 0.0);
        }
        grads[k].weight = delta * cache.inputs[k].transpose();
        grads[k].bias = delta;
        if (k > 0) delta = layers[k].weight.transpose() * delta;
    }
    return grads;
}

EmbeddingNet sgd_step(EmbeddingNet net, const NetGradients& grads, double beta) {
    net.apply_gradient(grads, beta);
    return net;
}

NetGradients zero_gradients(const EmbeddingNet& net) {
    NetGradients g;
    for (const auto& l : net.layers()) {
        g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return g;
}

void accumulate(NetGradients& into, const NetGradients& add, double scale) {
    for (std::size_t i = 0; i < into.size(); ++i) {
        into[i].weight += scale * add[i].weight;
        into[i].bias += scale * add[i].bias;
    }
}

double hinge_argument(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, int label,
                      const Eigen::MatrixXd& m_tot, double margin_b) {
    const Eigen::VectorXd diff = x_i - x_j;
    const double dist = diff.dot(m_tot * diff);
    return margin_b - label * (1.0 - dist);
}

Eigen::VectorXd pair_input_gradient(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, int label,
                                    const Eigen::MatrixXd& m_tot, double margin_b, double c_weight) {
    if (x_i.size() != x_j.size() || m_tot.rows() != x_i.size() || m_tot.cols() != x_i.size()) {
        throw InputError("pair_input_gradient: dimension mismatch");
    }
    const double asym = (m_tot - m_tot.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * std::max(1.0, m_tot.cwiseAbs().maxCoeff())) {
        throw InputError("pair_input_gradient: metric is not symmetric");
    }
    if (hinge_argument(x_i, x_j, label, m_tot, margin_b) <= 0.0) {
        return Eigen::VectorXd::Zero(x_i.size());
    }
    return 2.0 * c_weight * label * ((m_tot + m_tot.transpose()) * (x_i - x_j));
}

SiameseGradient siamese_gradient(const EmbeddingNet& net, const Eigen::VectorXd& raw_a,
                                 const Eigen::VectorXd& raw_b, int label, const Eigen::MatrixXd& m_tot,
                                 double margin_b, double c_weight) {
    const ForwardResult fa = forward(net, raw_a);
    const ForwardResult fb = forward(net, raw_b);
    SiameseGradient out;
    out.loss = c_weight * std::max(0.0, hinge_argument(fa.output, fb.output, label, m_tot, margin_b));
    const Eigen::VectorXd total = pair_input_gradient(fa.output, fb.output, label, m_tot, margin_b, c_weight);
    if (total.isZero(0.0)) {
        out.grads = zero_gradients(net);
        return out;
    }
    out.grads = backward(net, fa.cache, 0.5 * total);
    accumulate(out.grads, backward(net, fb.cache, -0.5 * total));
    return out;
}

void write_net(std::ostream& os, const EmbeddingNet& net) {
    os << kNetMagic << ' ' << kNetVersion << '\n';
    os << "layers " << net.layers().size() << '\n';
    os << std::setprecision(17);
    for (const auto& l : net.layers()) {
        os << "layer " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) os << (c ? " " : "") << l.weight(r, c);
            os << '\n';
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) os << (r ? " " : "") << l.bias(r);
        os << '\n';
    }
}

EmbeddingNet read_net(std::istream& is) {
    std::string magic, word;
    int version = 0;
    std::size_t n = 0;
    if (!(is >> magic >> version) || magic != kNetMagic) throw InputError("not a network checkpoint");
    if (version != kNetVersion) throw InputError("unsupported network checkpoint version " + std::to_string(version));
    if (!(is >> word >> n) || word != "layers") throw InputError("network checkpoint: missing layer count");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Index rows = 0, cols = 0;
        if (!(is >> word >> rows >> cols) || word != "layer" || rows < 1 || cols < 1) {
            throw InputError("network checkpoint: bad layer header " + std::to_string(i));
        }
        DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                if (!(is >> l.weight(r, c))) throw InputError("network checkpoint: truncated weights");
        for (Eigen::Index r = 0; r < rows; ++r)
            if (!(is >> l.bias(r))) throw InputError("network checkpoint: truncated bias");
        layers.push_back(std::move(l));
    }
    return EmbeddingNet(std::move(layers));
}

void save_net_file(const std::string& path, const EmbeddingNet& net) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_net(out, net);
}

EmbeddingNet load_net_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_net(in);
}

}  // namespace tcmot
