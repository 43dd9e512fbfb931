#include "saifdl/nn.hpp"

#include "saifdl/io.hpp"
#include "saifdl/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <utility>

namespace saifdl::nn {

namespace {

void check_specs_chain(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw ShapeError("network needs at least one layer");
    for (const LayerSpec& spec : specs) {
        if (spec.input_dim <= 0 || spec.output_dim <= 0)
            throw ShapeError("layer dimensions must be positive");
    }
    for (std::size_t l = 1; l < specs.size(); ++l) {
        if (specs[l].input_dim != specs[l - 1].output_dim)
            throw ShapeError("layer " + std::to_string(l) + " expects input " +
                             std::to_string(specs[l].input_dim) +
                             " but previous layer outputs " +
                             std::to_string(specs[l - 1].output_dim));
    }
}

Matrix softmax_rows(const Eigen::Ref<const Matrix>& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        const double row_max = logits.row(r).maxCoeff();
        Eigen::RowVectorXd shifted =
            (logits.row(r).array() - row_max).exp().matrix();
        probs.row(r) = shifted / shifted.sum();
    }
    return probs;
}

}  // namespace

std::int64_t Network::parameter_count() const {
    std::int64_t count = 0;
    for (const LayerSpec& spec : layers)
        count += spec.input_dim * spec.output_dim + spec.output_dim;
    return count;
}

Network init_network(const std::vector<LayerSpec>& specs, Task task,
                     std::uint64_t seed) {
    check_specs_chain(specs);
    Network net;
    net.layers = specs;
    net.task = task;
    Rng rng(seed);
    for (const LayerSpec& spec : specs) {
        const double bound = std::sqrt(
            6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
        Matrix w(spec.input_dim, spec.output_dim);
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c)
                w(r, c) = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(spec.output_dim));
    }
    return net;
}

std::pair<Matrix, ForwardCache> forward(const Network& net,
                                        const Eigen::Ref<const Matrix>& X) {
    if (X.cols() != net.input_dim())
        throw ShapeError("forward: input has " + std::to_string(X.cols()) +
                         " columns, network expects " +
                         std::to_string(net.input_dim()));
    ForwardCache cache;
    cache.inputs.reserve(net.layers.size());
    cache.preactivations.reserve(net.layers.size());

    Matrix current = X;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        cache.inputs.push_back(current);
        Matrix z = current * net.weights[l];
        z.rowwise() += net.biases[l].transpose();
        cache.preactivations.push_back(z);
        if (net.layers[l].activation == Activation::ReLU)
            current = z.cwiseMax(0.0);
        else
            current = std::move(z);
    }
    if (net.task == Task::Classification)
        return {softmax_rows(current), std::move(cache)};
    return {std::move(current), std::move(cache)};
}

const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::CrossEntropy: return "cross_entropy";
        case LossKind::MSE: return "mse";
        case LossKind::MAE: return "mae";
    }
    return "";
}

LossKind loss_from_name(const std::string& name) {
    if (name == "cross_entropy") return LossKind::CrossEntropy;
    if (name == "mse") return LossKind::MSE;
    if (name == "mae") return LossKind::MAE;
    throw DomainError("unknown loss kind: " + name);
}

std::pair<double, Matrix> base_loss(LossKind kind,
                                    const Eigen::Ref<const Vector>& y_true,
                                    const Eigen::Ref<const Matrix>& y_pred) {
    const Index batch = y_pred.rows();
    if (y_true.size() != batch)
        throw ShapeError("base_loss: " + std::to_string(y_true.size()) +
                         " labels for " + std::to_string(batch) +
                         " prediction rows");
    if (batch == 0) throw ShapeError("base_loss: empty batch");
    const double inv_batch = 1.0 / static_cast<double>(batch);

    if (kind == LossKind::CrossEntropy) {
        double value = 0.0;
        Matrix grad = y_pred * inv_batch;  // (p - onehot)/B, logit space
        for (Index s = 0; s < batch; ++s) {
            const double label = y_true[s];
            const auto cls = static_cast<Index>(label);
            if (cls < 0 || cls >= y_pred.cols() ||
                static_cast<double>(cls) != label)
                throw DomainError("base_loss: label " + format_double(label) +
                                  " is not a class index below " +
                                  std::to_string(y_pred.cols()));
            const double p = std::min(std::max(y_pred(s, cls), 1e-12), 1.0);
            value -= std::log(p);
            grad(s, cls) -= inv_batch;
        }
        return {value * inv_batch, std::move(grad)};
    }

    if (y_pred.cols() != 1)
        throw ShapeError("base_loss: regression losses expect a single "
                         "output column");
    const Vector diff = y_pred.col(0) - y_true;
    if (kind == LossKind::MSE) {
        const double value = diff.squaredNorm() * inv_batch;
        Matrix grad = (2.0 * inv_batch) * diff;
        return {value, std::move(grad)};
    }
    // MAE; subgradient 0 where the residual is exactly 0.
    const double value = diff.cwiseAbs().sum() * inv_batch;
    Matrix grad(batch, 1);
    for (Index s = 0; s < batch; ++s)
        grad(s, 0) = diff[s] > 0.0 ? inv_batch : (diff[s] < 0.0 ? -inv_batch : 0.0);
    return {value, std::move(grad)};
}

ParamGrads backward(const Network& net, const ForwardCache& cache,
                    const Eigen::Ref<const Matrix>& output_gradient) {
    const std::size_t n_layers = net.layers.size();
    if (cache.inputs.size() != n_layers ||
        cache.preactivations.size() != n_layers)
        throw StateError("backward: cache does not match network depth");
    const Index batch = cache.inputs.front().rows();
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (cache.inputs[l].rows() != batch ||
            cache.inputs[l].cols() != net.layers[l].input_dim ||
            cache.preactivations[l].rows() != batch ||
            cache.preactivations[l].cols() != net.layers[l].output_dim)
            throw StateError("backward: cache shapes do not match network");
    }
    if (output_gradient.rows() != batch ||
        output_gradient.cols() != net.output_dim())
        throw ShapeError("backward: output gradient is " +
                         std::to_string(output_gradient.rows()) + "x" +
                         std::to_string(output_gradient.cols()) +
                         ", expected " + std::to_string(batch) + "x" +
                         std::to_string(net.output_dim()));

    ParamGrads grads;
    grads.weights.resize(n_layers);
    grads.biases.resize(n_layers);
    Matrix grad_out = output_gradient;
    for (std::size_t l = n_layers; l-- > 0;) {
        Matrix grad_z;
        if (net.layers[l].activation == Activation::ReLU) {
            grad_z = (cache.preactivations[l].array() > 0.0)
                         .select(grad_out, Matrix::Zero(grad_out.rows(),
                                                        grad_out.cols()));
        } else {
            grad_z = std::move(grad_out);
        }
        grads.weights[l] = cache.inputs[l].transpose() * grad_z;
        grads.biases[l] = grad_z.colwise().sum().transpose();
        if (l > 0) grad_out = grad_z * net.weights[l].transpose();
    }
    return grads;
}

Matrix softmax_vjp(const Eigen::Ref<const Matrix>& probs,
                   const Eigen::Ref<const Matrix>& grad_probs) {
    if (probs.rows() != grad_probs.rows() || probs.cols() != grad_probs.cols())
        throw ShapeError("softmax_vjp: shape mismatch");
    Matrix grad_logits(probs.rows(), probs.cols());
    for (Index r = 0; r < probs.rows(); ++r) {
        const double dot = grad_probs.row(r).dot(probs.row(r));
        grad_logits.row(r) =
            (probs.row(r).array() * (grad_probs.row(r).array() - dot)).matrix();
    }
    return grad_logits;
}

AdamState init_adam(const Network& net, double learning_rate, double beta1,
                    double beta2, double epsilon) {
    AdamState state;
    state.learning_rate = learning_rate;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.epsilon = epsilon;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        state.m_weights.push_back(Matrix::Zero(net.weights[l].rows(),
                                               net.weights[l].cols()));
        state.v_weights.push_back(Matrix::Zero(net.weights[l].rows(),
                                               net.weights[l].cols()));
        state.m_biases.push_back(Vector::Zero(net.biases[l].size()));
        state.v_biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    return state;
}

namespace {

template <typename Param>
void adam_update(Param& theta, Param& m, Param& v, const Param& grad,
                 const AdamState& state, double bc1, double bc2) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    theta.array() -=
        state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
}

}  // namespace

void adam_step(AdamState& state, Network& net, const ParamGrads& grads) {
    if (grads.weights.size() != net.weights.size() ||
        grads.biases.size() != net.biases.size())
        throw ShapeError("adam_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        if (grads.weights[l].rows() != net.weights[l].rows() ||
            grads.weights[l].cols() != net.weights[l].cols() ||
            grads.biases[l].size() != net.biases[l].size())
            throw ShapeError("adam_step: gradient shape mismatch at layer " +
                             std::to_string(l));
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        adam_update(net.weights[l], state.m_weights[l], state.v_weights[l],
                    grads.weights[l], state, bc1, bc2);
        adam_update(net.biases[l], state.m_biases[l], state.v_biases[l],
                    grads.biases[l], state, bc1, bc2);
    }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["format"] = "saifdl-checkpoint";
    doc["version"] = 1;
    doc["task"] = task_name(net.task);
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LayerSpec& spec = net.layers[l];
        nlohmann::json layer;
        layer["input_dim"] = spec.input_dim;
        layer["output_dim"] = spec.output_dim;
        layer["activation"] =
            spec.activation == Activation::ReLU ? "relu" : "identity";
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(spec.input_dim * spec.output_dim));
        for (Index r = 0; r < spec.input_dim; ++r)
            for (Index c = 0; c < spec.output_dim; ++c)
                w.push_back(net.weights[l](r, c));
        layer["weights"] = w;
        layer["biases"] = std::vector<double>(
            net.biases[l].data(), net.biases[l].data() + net.biases[l].size());
        layers.push_back(std::move(layer));
    }
    doc["layers"] = std::move(layers);
    atomic_write_file(path, doc.dump(2) + "\n");
}

Network load_checkpoint(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format") != "saifdl-checkpoint" || doc.at("version") != 1)
            throw IoError("checkpoint " + path.string() +
                          ": unsupported format or version");
        Network net;
        const std::string task = doc.at("task");
        if (task == "classification")
            net.task = Task::Classification;
        else if (task == "regression")
            net.task = Task::Regression;
        else
            throw IoError("checkpoint " + path.string() + ": unknown task '" +
                          task + "'");
        for (const auto& layer : doc.at("layers")) {
            LayerSpec spec;
            spec.input_dim = layer.at("input_dim");
            spec.output_dim = layer.at("output_dim");
            const std::string act = layer.at("activation");
            if (act == "relu")
                spec.activation = Activation::ReLU;
            else if (act == "identity")
                spec.activation = Activation::Identity;
            else
                throw IoError("checkpoint " + path.string() +
                              ": unknown activation '" + act + "'");
            const auto w = layer.at("weights").get<std::vector<double>>();
            const auto b = layer.at("biases").get<std::vector<double>>();
            if (std::cmp_not_equal(w.size(), spec.input_dim * spec.output_dim) ||
                std::cmp_not_equal(b.size(), spec.output_dim))
                throw IoError("checkpoint " + path.string() +
                              ": parameter sizes do not match layer spec");
            Matrix weights(spec.input_dim, spec.output_dim);
            for (Index r = 0; r < spec.input_dim; ++r)
                for (Index c = 0; c < spec.output_dim; ++c)
                    weights(r, c) =
                        w[static_cast<std::size_t>(r * spec.output_dim + c)];
            net.layers.push_back(spec);
            net.weights.push_back(std::move(weights));
            net.biases.push_back(
                Eigen::Map<const Vector>(b.data(), spec.output_dim));
        }
        check_specs_chain(net.layers);
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace saifdl::nn
