#include "bope/monne.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "bope/errors.hpp"
#include "bope/random.hpp"

namespace bope {

namespace {

constexpr double kLeakySlope = 0.25;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Swish:
      return z.unaryExpr([](double v) { return v * sigmoid(v); });
    case Activation::Sigmoid:
      return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::LeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
  }
  return z;
}

Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Swish:
      return z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s + v * s * (1.0 - s);
      });
    case Activation::Sigmoid:
      return z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 - s);
      });
    case Activation::LeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ComparisonSet::ComparisonSet(int num_outputs)
    : num_outputs_(num_outputs), first_(num_outputs, 0), second_(num_outputs, 0) {
  if (num_outputs < 1) throw InputError("ComparisonSet needs a positive output dimension");
}

void ComparisonSet::add(const OutputVector& first, const OutputVector& second, int label) {
  if (first.size() != num_outputs_ || second.size() != num_outputs_)
    throw InputError("comparison outputs have wrong dimension");
  if (label != 1 && label != -1 && label != 0) throw InputError("comparison label must be +1, -1 or 0");
  const Eigen::Index m = first_.cols();
  first_.conservativeResize(Eigen::NoChange, m + 1);
  second_.conservativeResize(Eigen::NoChange, m + 1);
  first_.col(m) = first;
  second_.col(m) = second;
  labels_.push_back(label);
}

Eigen::MatrixXd ComparisonSet::compared_outputs() const {
  Eigen::MatrixXd all(num_outputs_, 2 * first_.cols());
  all << first_, second_;
  return all;
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Swish:
      return "swish";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::LeakyRelu:
      return "leaky_relu";
  }
  return "swish";
}

Activation activation_from_string(std::string_view name) {
  if (name == "swish") return Activation::Swish;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

MonotonicNet MonotonicNet::init(int num_inputs, const NetArchitecture& arch, std::uint64_t seed) {
  if (num_inputs < 1) throw InputError("network needs at least one input");
  for (int h : arch.hidden)
    if (h < 1) throw InputError("hidden layer sizes must be positive");
  MonotonicNet net;
  net.arch_ = arch;
  net.input_offset_ = Eigen::VectorXd::Zero(num_inputs);
  net.input_scale_ = Eigen::VectorXd::Ones(num_inputs);

  Rng rng(seed);
  std::vector<int> sizes{num_inputs};
  sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
  sizes.push_back(1);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double inv = 1.0 / fan_in;
    std::uniform_real_distribution<double> weight_dist =
        arch.monotonic ? std::uniform_real_distribution<double>(-inv - 6.0, inv)
                       : std::uniform_real_distribution<double>(-std::sqrt(inv), std::sqrt(inv));
    std::uniform_real_distribution<double> bias_dist(-inv, inv);
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd(fan_out)};
    for (Eigen::Index j = 0; j < layer.raw_weights.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.raw_weights.rows(); ++i) layer.raw_weights(i, j) = weight_dist(rng);
    for (Eigen::Index i = 0; i < layer.raw_biases.size(); ++i) layer.raw_biases(i) = bias_dist(rng);
    net.layers_.push_back(std::move(layer));
  }
  net.hinge_scale_raw_ = std::log(std::numbers::e - 1.0);  // softplus⁻¹(1)
  return net;
}

Eigen::MatrixXd MonotonicNet::effective_weights(std::size_t layer) const {
  const auto& raw = layers_[layer].raw_weights;
  return arch_.monotonic ? Eigen::MatrixXd(raw.array().exp()) : raw;
}

double MonotonicNet::hinge_scale() const { return softplus(hinge_scale_raw_); }

void MonotonicNet::set_input_scaling(Eigen::VectorXd offset, Eigen::VectorXd scale) {
  if (offset.size() != num_inputs() || scale.size() != num_inputs())
    throw InputError("input scaling has wrong dimension");
  if (!(scale.array() > 0.0).all()) throw InputError("input scaling must be positive");
  input_offset_ = std::move(offset);
  input_scale_ = std::move(scale);
}

MonotonicNet::Trace MonotonicNet::forward_trace(const Eigen::MatrixXd& outputs) const {
  if (outputs.rows() != num_inputs())
    throw InputError("network expects inputs of dimension " + std::to_string(num_inputs()) + ", got " +
                     std::to_string(outputs.rows()));
  Trace trace;
  trace.post.push_back((outputs.colwise() - input_offset_).array().colwise() / input_scale_.array());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = effective_weights(l) * trace.post.back();
    z.colwise() += layers_[l].raw_biases;
    if (l + 1 == layers_.size()) {
      trace.output = z.row(0);
    } else {
      trace.post.push_back(activate(z, arch_.activation));
      trace.pre.push_back(std::move(z));
    }
  }
  return trace;
}

Eigen::VectorXd MonotonicNet::backward(const Trace& trace, const Eigen::RowVectorXd& output_grad) const {
  Eigen::VectorXd grad(num_params());
  // Walk layers in reverse, writing into the flat layout.
  std::vector<Eigen::Index> offsets;
  Eigen::Index offset = 0;
  for (const auto& layer : layers_) {
    offsets.push_back(offset);
    offset += layer.raw_weights.size() + layer.raw_biases.size();
  }
  Eigen::MatrixXd upstream = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd weights = effective_weights(l);
    Eigen::MatrixXd d_weights = upstream * trace.post[l].transpose();
    if (arch_.monotonic) d_weights.array() *= weights.array();
    const Eigen::VectorXd d_bias = upstream.rowwise().sum();
    const Eigen::Index w_size = d_weights.size();
    grad.segment(offsets[l], w_size) = Eigen::Map<const Eigen::VectorXd>(d_weights.data(), w_size);
    grad.segment(offsets[l] + w_size, d_bias.size()) = d_bias;
    if (l > 0) {
      upstream = (weights.transpose() * upstream).cwiseProduct(activation_derivative(trace.pre[l - 1], arch_.activation));
    }
  }
  grad(grad.size() - 1) = 0.0;
  return grad;
}

double MonotonicNet::forward(const OutputVector& y) const { return forward_trace(y).output(0); }

Eigen::RowVectorXd MonotonicNet::forward_batch(const Eigen::MatrixXd& outputs) const {
  return forward_trace(outputs).output;
}

Eigen::VectorXd MonotonicNet::input_gradient(const OutputVector& y) const {
  const Trace trace = forward_trace(y);
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Ones(1, 1);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    upstream = effective_weights(l).transpose() * upstream;
    if (l > 0) upstream = upstream.cwiseProduct(activation_derivative(trace.pre[l - 1], arch_.activation));
  }
  return upstream.col(0).cwiseQuotient(input_scale_);
}

Eigen::Index MonotonicNet::num_params() const {
  Eigen::Index n = 1;
  for (const auto& layer : layers_) n += layer.raw_weights.size() + layer.raw_biases.size();
  return n;
}

Eigen::VectorXd MonotonicNet::flat_params() const {
  Eigen::VectorXd p(num_params());
  Eigen::Index offset = 0;
  for (const auto& layer : layers_) {
    p.segment(offset, layer.raw_weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(layer.raw_weights.data(), layer.raw_weights.size());
    offset += layer.raw_weights.size();
    p.segment(offset, layer.raw_biases.size()) = layer.raw_biases;
    offset += layer.raw_biases.size();
  }
  p(offset) = hinge_scale_raw_;
  return p;
}

void MonotonicNet::set_flat_params(const Eigen::VectorXd& p) {
  if (p.size() != num_params()) throw InputError("flat parameter vector has wrong length");
  Eigen::Index offset = 0;
  for (auto& layer : layers_) {
    layer.raw_weights = Eigen::Map<const Eigen::MatrixXd>(p.data() + offset, layer.raw_weights.rows(),
                                                          layer.raw_weights.cols());
    offset += layer.raw_weights.size();
    layer.raw_biases = p.segment(offset, layer.raw_biases.size());
    offset += layer.raw_biases.size();
  }
  hinge_scale_raw_ = p(offset);
}

HingeLoss hinge_loss(const MonotonicNet& net, const ComparisonSet& data, bool with_gradient) {
  if (data.size() < 1) throw InputError("hinge loss needs at least one comparison");
  const Eigen::Index m = data.size();
  const auto trace = net.forward_trace(data.compared_outputs());
  const double alpha = net.hinge_scale();

  HingeLoss loss;
  Eigen::RowVectorXd d_delta = Eigen::RowVectorXd::Zero(m);
  double d_alpha = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double delta = trace.output(i) - trace.output(m + i);
    const int p = data.labels()[static_cast<std::size_t>(i)];
    if (p == 0) {
      loss.value += std::abs(delta);
      d_delta(i) = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
    } else {
      const double margin = 1.0 - alpha * delta * p;
      if (margin > 0.0) {
        loss.value += margin;
        d_delta(i) = -alpha * p;
        d_alpha -= delta * p;
      }
    }
  }
  if (!with_gradient) return loss;

  Eigen::RowVectorXd output_grad(2 * m);
  output_grad << d_delta, -d_delta;
  loss.gradient = net.backward(trace, output_grad);
  loss.gradient(loss.gradient.size() - 1) = d_alpha * sigmoid(net.hinge_scale_raw());
  return loss;
}

TrainResult train_member(MonotonicNet& net, const ComparisonSet& data, const TrainConfig& cfg) {
  if (data.size() < 1) throw InputError("training needs at least one comparison");
  if (cfg.epochs < 1) throw InputError("training needs at least one epoch");
  Eigen::VectorXd params = net.flat_params();
  Eigen::VectorXd best_params = params;
  Eigen::VectorXd first_moment = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd second_moment = Eigen::VectorXd::Zero(params.size());
  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  double beta1_power = 1.0, beta2_power = 1.0;

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    net.set_flat_params(params);
    const bool last = epoch == cfg.epochs;
    const HingeLoss loss = hinge_loss(net, data, !last);
    if (!std::isfinite(loss.value) || (!last && !loss.gradient.allFinite()))
      throw TrainingError("non-finite hinge loss or gradient at epoch " + std::to_string(epoch), epoch);
    if (epoch == 0) result.initial_loss = loss.value;
    if (loss.value < best_loss) {
      best_loss = loss.value;
      best_params = params;
    }
    result.epochs_run = epoch;
    if (loss.value <= cfg.early_stop_loss) {
      result.early_stopped = true;
      break;
    }
    if (last) break;

    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.cosine_period));
    const double lr = cfg.learning_rate_min + (cfg.learning_rate - cfg.learning_rate_min) * cosine;
    beta1_power *= cfg.adam_beta1;
    beta2_power *= cfg.adam_beta2;
    first_moment = cfg.adam_beta1 * first_moment + (1.0 - cfg.adam_beta1) * loss.gradient;
    second_moment = cfg.adam_beta2 * second_moment + (1.0 - cfg.adam_beta2) * loss.gradient.cwiseAbs2();
    const Eigen::VectorXd m_hat = first_moment / (1.0 - beta1_power);
    const Eigen::VectorXd v_hat = second_moment / (1.0 - beta2_power);
    params.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + cfg.adam_epsilon);
  }

  net.set_flat_params(best_params);
  result.final_loss = best_loss;
  return result;
}

NormStats normalize(const MonotonicNet& member, const ComparisonSet& data) {
  if (data.size() < 1) throw InputError("normalization needs at least one comparison");
  const Eigen::RowVectorXd scores = member.forward_batch(data.compared_outputs());
  NormStats stats;
  stats.g_max = scores.maxCoeff();
  stats.mean = scores.mean();
  const double m = static_cast<double>(data.size());
  stats.sigma = std::sqrt((scores.array() - stats.mean).square().sum() / m);
  if (!(stats.sigma > 0.0) || !std::isfinite(stats.sigma)) {
    stats.sigma = 1.0;
    stats.sigma_fallback = true;
  }
  return stats;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> compared_output_scaling(const ComparisonSet& data) {
  const Eigen::MatrixXd all = data.compared_outputs();
  const Eigen::VectorXd lo = all.rowwise().minCoeff();
  Eigen::VectorXd range = all.rowwise().maxCoeff() - lo;
  for (Eigen::Index i = 0; i < range.size(); ++i)
    if (!(range(i) > 1e-12)) range(i) = 1.0;
  return {lo, range};
}

MonotonicEnsemble MonotonicEnsemble::train(const ComparisonSet& data, const Options& options, std::uint64_t seed) {
  if (options.ensemble_size < 1) throw InputError("ensemble size must be at least 1");
  if (data.size() < 1) throw InputError("ensemble training needs at least one comparison");
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(data.num_outputs());
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(data.num_outputs());
  if (options.scale_inputs) std::tie(offset, scale) = compared_output_scaling(data);

  const auto count = static_cast<std::size_t>(options.ensemble_size);
  std::vector<MonotonicNet> members;
  members.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    members.push_back(MonotonicNet::init(data.num_outputs(), options.architecture, derive_seed(seed, "member", j)));
    members.back().set_input_scaling(offset, scale);
  }

  std::vector<TrainResult> results(count);
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](std::size_t j) {
    try {
      results[j] = train_member(members[j], data, options.train);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.threads)), 1, count);
  if (threads == 1) {
    for (std::size_t j = 0; j < count; ++j) work(j);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t j = t; j < count; j += threads) work(j);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t j = 0; j < count; ++j) {
    if (!errors[j]) continue;
    try {
      std::rethrow_exception(errors[j]);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string("ensemble member ") + std::to_string(j) + ": " + e.what(), e.epoch(),
                          static_cast<int>(j));
    }
  }

  MonotonicEnsemble ens = from_members(std::move(members), data);
  ens.train_results_ = std::move(results);
  return ens;
}

MonotonicEnsemble MonotonicEnsemble::from_members(std::vector<MonotonicNet> members, const ComparisonSet& data) {
  if (members.empty()) throw InputError("ensemble needs at least one member");
  MonotonicEnsemble ens;
  for (const auto& m : members) ens.stats_.push_back(normalize(m, data));
  ens.members_ = std::move(members);
  ens.train_results_.resize(ens.members_.size());
  return ens;
}

double MonotonicEnsemble::normalized_score(int j, const OutputVector& y) const {
  const auto& s = stats(j);
  return (member(j).forward(y) - s.g_max) / s.sigma;
}

Eigen::RowVectorXd MonotonicEnsemble::normalized_scores(int j, const Eigen::MatrixXd& outputs) const {
  const auto& s = stats(j);
  return (member(j).forward_batch(outputs).array() - s.g_max) / s.sigma;
}

GaussianBelief MonotonicEnsemble::predict_belief(const OutputVector& y) const {
  return predict_beliefs(y).front();
}

std::vector<GaussianBelief> MonotonicEnsemble::predict_beliefs(const Eigen::MatrixXd& outputs) const {
  Eigen::MatrixXd scores(size(), outputs.cols());
  for (int j = 0; j < size(); ++j) scores.row(j) = normalized_scores(j, outputs);
  std::vector<GaussianBelief> beliefs(static_cast<std::size_t>(outputs.cols()));
  for (Eigen::Index c = 0; c < outputs.cols(); ++c) {
    const double mean = scores.col(c).mean();
    const double var = (scores.col(c).array() - mean).square().mean();
    beliefs[static_cast<std::size_t>(c)] = {mean, var};
  }
  return beliefs;
}

std::string MonotonicEnsemble::config_hash() const {
  const auto& arch = members_.front().architecture();
  std::string canonical = "k=" + std::to_string(num_outputs()) + ";hidden=";
  for (int h : arch.hidden) canonical += std::to_string(h) + ",";
  canonical += ";act=" + to_string(arch.activation) + ";mono=" + (arch.monotonic ? "1" : "0") +
               ";members=" + std::to_string(size());
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
  return buf;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InputError("ensemble artifact: bad matrix shape");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string MonotonicEnsemble::serialize() const {
  nlohmann::json doc;
  doc["format"] = "bope-monne-ensemble";
  doc["version"] = 1;
  doc["config_hash"] = config_hash();
  const auto& arch = members_.front().architecture();
  doc["architecture"] = {{"hidden", arch.hidden}, {"activation", to_string(arch.activation)},
                         {"monotonic", arch.monotonic}};
  doc["members"] = nlohmann::json::array();
  for (int j = 0; j < size(); ++j) {
    const auto& net = member(j);
    nlohmann::json m;
    m["layers"] = nlohmann::json::array();
    for (const auto& layer : net.layers())
      m["layers"].push_back({{"weights", matrix_to_json(layer.raw_weights)},
                             {"biases", std::vector<double>(layer.raw_biases.data(),
                                                            layer.raw_biases.data() + layer.raw_biases.size())}});
    m["hinge_scale_raw"] = net.hinge_scale_raw();
    m["input_offset"] = std::vector<double>(net.input_offset().data(), net.input_offset().data() + net.num_inputs());
    m["input_scale"] = std::vector<double>(net.input_scale().data(), net.input_scale().data() + net.num_inputs());
    const auto& s = stats(j);
    m["norm"] = {{"g_max", s.g_max}, {"mean", s.mean}, {"sigma", s.sigma}, {"sigma_fallback", s.sigma_fallback}};
    const auto& r = train_results_[static_cast<std::size_t>(j)];
    m["train"] = {{"initial_loss", r.initial_loss}, {"final_loss", r.final_loss}, {"epochs_run", r.epochs_run},
                  {"early_stopped", r.early_stopped}};
    doc["members"].push_back(std::move(m));
  }
  return doc.dump();
}

MonotonicEnsemble MonotonicEnsemble::deserialize(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("ensemble artifact: ") + e.what());
  }
  if (doc.value("format", "") != "bope-monne-ensemble" || doc.value("version", 0) != 1)
    throw InputError("ensemble artifact: unsupported format or version");
  NetArchitecture arch;
  arch.hidden = doc.at("architecture").at("hidden").get<std::vector<int>>();
  arch.activation = activation_from_string(doc.at("architecture").at("activation").get<std::string>());
  arch.monotonic = doc.at("architecture").at("monotonic").get<bool>();

  MonotonicEnsemble ens;
  for (const auto& m : doc.at("members")) {
    const Eigen::VectorXd offset = vector_from_json(m.at("input_offset"));
    MonotonicNet net = MonotonicNet::init(static_cast<int>(offset.size()), arch, 0);
    auto& layers = net.layers();
    if (m.at("layers").size() != layers.size()) throw InputError("ensemble artifact: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Eigen::MatrixXd w = matrix_from_json(m.at("layers")[l].at("weights"));
      Eigen::VectorXd b = vector_from_json(m.at("layers")[l].at("biases"));
      if (w.rows() != layers[l].raw_weights.rows() || w.cols() != layers[l].raw_weights.cols() ||
          b.size() != layers[l].raw_biases.size())
        throw InputError("ensemble artifact: layer shape mismatch");
      layers[l].raw_weights = std::move(w);
      layers[l].raw_biases = std::move(b);
    }
    net.set_hinge_scale_raw(m.at("hinge_scale_raw").get<double>());
    net.set_input_scaling(offset, vector_from_json(m.at("input_scale")));
    const auto& norm = m.at("norm");
    ens.stats_.push_back({norm.at("g_max").get<double>(), norm.at("mean").get<double>(),
                          norm.at("sigma").get<double>(), norm.at("sigma_fallback").get<bool>()});
    const auto& tr = m.at("train");
    ens.train_results_.push_back({tr.at("initial_loss").get<double>(), tr.at("final_loss").get<double>(),
                                  tr.at("epochs_run").get<int>(), tr.at("early_stopped").get<bool>()});
    ens.members_.push_back(std::move(net));
  }
  if (ens.members_.empty()) throw InputError("ensemble artifact: no members");
  if (doc.at("config_hash").get<std::string>() != ens.config_hash())
    throw InputError("ensemble artifact: config hash mismatch");
  return ens;
}

}  // namespace bope
