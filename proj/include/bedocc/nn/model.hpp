#pragma once

// Trainable two-class classifiers over feature matrices: logistic regression,
// a one-hidden-layer MLP, a small CNN and an LSTM, all ending in a two-way
// softmax trained with cross-entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/features.hpp"
#include "bedocc/metrics.hpp"
#include "bedocc/nn/layers.hpp"
#include "bedocc/smote.hpp"

namespace bedocc::nn {

enum class Family { LR, MLP, CNN, LSTM };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::LR: return "LR";
    case Family::MLP: return "MLP";
    case Family::CNN: return "CNN";
    default: return "LSTM";
  }
}

inline Family family_from_string(const std::string& s) {
  std::string u;
  for (char ch : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  if (u == "LR") return Family::LR;
  if (u == "MLP") return Family::MLP;
  if (u == "CNN") return Family::CNN;
  if (u == "LSTM") return Family::LSTM;
  throw InvalidArgument("unknown classifier family '" + s + "'");
}

enum class Standardization { ZScore, LogZScore };

struct ModelSpec {
  Family family = Family::LSTM;

  // logistic regression: penalty strength, l1 ratio, l2 ratio
  double lr_strength = 1e-4;
  double lr_l1_ratio = 0.0;
  double lr_l2_ratio = 0.0;

  // MLP: hidden width, l2 penalty, SGD momentum
  std::size_t mlp_hidden = 10;
  double mlp_l2 = 1e-4;
  double mlp_momentum = 0.9;

  // CNN / LSTM
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t conv_filters = 24;
  std::size_t kernel_size = 2;
  double dropout = 0.1;
  std::size_t dense_units = 16;
  std::size_t lstm_units = 64;
  std::size_t conv_layers = 1;

  // step size: the LSTM learning rate, and the SGD/Adam step for the other families
  double learning_rate = 1e-3;

  bool use_smote = true;
  std::size_t smote_k = 5;
  bool early_stopping = true;
  Standardization standardization = Standardization::LogZScore;
  std::uint64_t seed = 1;
};

/// Family defaults for the fields that the hyperparameter tables leave open.
inline ModelSpec default_spec(Family f) {
  ModelSpec s;
  s.family = f;
  switch (f) {
    case Family::LR:
      s.epochs = 100;
      s.batch_size = 32;
      s.learning_rate = 0.05;
      break;
    case Family::MLP:
      s.epochs = 100;
      s.batch_size = 32;
      s.learning_rate = 0.01;
      break;
    case Family::CNN:
    case Family::LSTM:
      break;
  }
  return s;
}

inline std::string describe(const ModelSpec& s) {
  std::ostringstream os;
  os << to_string(s.family) << ' ';
  switch (s.family) {
    case Family::LR:
      os << "nu1=" << s.lr_strength << " nu2=" << s.lr_l1_ratio << " nu3=" << s.lr_l2_ratio;
      break;
    case Family::MLP:
      os << "eta1=" << s.mlp_hidden << " eta2=" << s.mlp_l2 << " eta3=" << s.mlp_momentum;
      break;
    case Family::CNN:
      os << "xi1=" << s.batch_size << " xi2=" << s.epochs << " alpha1=" << s.conv_filters << " alpha2=" << s.kernel_size
         << " alpha3=" << s.dropout << " alpha4=" << s.dense_units;
      break;
    case Family::LSTM:
      os << "xi1=" << s.batch_size << " xi2=" << s.epochs << " alpha3=" << s.dropout << " alpha4=" << s.dense_units
         << " beta1=" << s.lstm_units << " beta2=" << s.learning_rate;
      break;
  }
  return os.str();
}

class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

struct LabeledSet {
  std::vector<FeatureMatrix> items;
  std::vector<int> labels;
  std::vector<std::string> groups;

  void add(FeatureMatrix m, int label, std::string group = {}) {
    items.push_back(std::move(m));
    labels.push_back(label);
    groups.push_back(std::move(group));
  }
  void append(const LabeledSet& other) {
    items.insert(items.end(), other.items.begin(), other.items.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    groups.insert(groups.end(), other.groups.begin(), other.groups.end());
  }
  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::size_t count(int label) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label)); }
};

/// Per-feature-column affine map fitted on training matrices (all frames pooled).
struct Standardizer {
  Standardization mode = Standardization::ZScore;
  std::vector<double> mean, stddev;
  std::vector<std::uint8_t> log_columns;

  static constexpr double kLogFloor = 1e-8;

  static Standardizer fit(const std::vector<FeatureMatrix>& items, Standardization mode) {
    require(!items.empty(), "Standardizer::fit: no items");
    const std::size_t cols = items.front().cols;
    Standardizer s;
    s.mode = mode;
    s.log_columns.assign(cols, 0);
    if (mode == Standardization::LogZScore) {
      std::vector<double> lo(cols, std::numeric_limits<double>::infinity());
      for (const auto& m : items)
        for (std::size_t r = 0; r < m.rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) lo[c] = std::min(lo[c], m(r, c));
      for (std::size_t c = 0; c < cols; ++c) s.log_columns[c] = lo[c] >= 0.0 ? 1 : 0;
    }
    std::vector<double> sum(cols, 0.0), sq(cols, 0.0);
    double n = 0.0;
    for (const auto& m : items) {
      for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) sum[c] += s.pre(m(r, c), c);
      n += static_cast<double>(m.rows);
    }
    s.mean.resize(cols);
    for (std::size_t c = 0; c < cols; ++c) s.mean[c] = sum[c] / n;
    for (const auto& m : items)
      for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          const double d = s.pre(m(r, c), c) - s.mean[c];
          sq[c] += d * d;
        }
    s.stddev.resize(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      const double sd = std::sqrt(sq[c] / n);
      s.stddev[c] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  double pre(double v, std::size_t c) const { return log_columns[c] ? std::log(std::max(v, 0.0) + kLogFloor) : v; }
  double apply(double v, std::size_t c) const { return (pre(v, c) - mean[c]) / stddev[c]; }

  template <typename RowOut>
  void write_row(const FeatureMatrix& m, RowOut&& out) const {
    require(m.cols == mean.size(), "Standardizer: feature dimension mismatch");
    for (std::size_t r = 0; r < m.rows; ++r)
      for (std::size_t c = 0; c < m.cols; ++c)
        out(static_cast<Eigen::Index>(r * m.cols + c)) = apply(m(r, c), c);
  }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// p(class 1) of a two-logit softmax.
inline double softmax2(double z0, double z1) { return 1.0 / (1.0 + std::exp(z0 - z1)); }

class Network {
 public:
  Network(const ModelSpec& spec, std::size_t steps, std::size_t features, Rng& rng)
      : steps_(steps), features_(features) {
    const std::size_t in = steps * features;
    std::size_t width = in;
    auto add = [&](std::unique_ptr<Layer> l) {
      width = l->out_width();
      layers_.push_back(std::move(l));
    };
    auto head = [&]() {
      add(std::make_unique<Dense>(width, spec.dense_units, rng));
      add(std::make_unique<Relu>(width));
      add(std::make_unique<Dense>(width, 8, rng));
      add(std::make_unique<Relu>(width));
      add(std::make_unique<Dense>(width, 2, rng, 1.0));
    };
    switch (spec.family) {
      case Family::LR:
        add(std::make_unique<Dense>(in, 2, rng, 1.0));
        break;
      case Family::MLP:
        require(spec.mlp_hidden >= 1, "MLP needs at least one hidden unit");
        add(std::make_unique<Dense>(in, spec.mlp_hidden, rng));
        add(std::make_unique<Relu>(width));
        add(std::make_unique<Dense>(width, 2, rng, 1.0));
        break;
      case Family::CNN: {
        ImageShape shape{1, steps, features};
        for (std::size_t l = 0; l < std::max<std::size_t>(1, spec.conv_layers); ++l) {
          auto conv = std::make_unique<Conv2d>(shape, spec.conv_filters, spec.kernel_size, rng);
          shape = conv->out_shape();
          add(std::move(conv));
          add(std::make_unique<Relu>(width));
          if (shape.height >= 2 && shape.width >= 2) {
            auto pool = std::make_unique<MaxPool2>(shape);
            shape = pool->out_shape();
            add(std::move(pool));
          }
          add(std::make_unique<Dropout>(width, spec.dropout));
        }
        head();
        break;
      }
      case Family::LSTM:
        add(std::make_unique<Lstm>(steps, features, spec.lstm_units, rng));
        add(std::make_unique<Relu>(width));
        add(std::make_unique<Dropout>(width, spec.dropout));
        head();
        break;
    }
    for (auto& l : layers_) l->collect(params_);
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  std::size_t steps() const { return steps_; }
  std::size_t features() const { return features_; }

  Mat logits(const Mat& x) const {
    Mat h = x;
    for (const auto& l : layers_) h = l->infer(h);
    return h;
  }

  /// Mean cross-entropy of a batch; gradients are accumulated into the parameter grads.
  double forward_backward(const Mat& x, std::span<const int> y, Rng& rng) {
    for (auto& p : params_) p.grad->setZero();
    Mat h = x;
    for (auto& l : layers_) h = l->forward(h, true, rng);
    const auto n = static_cast<double>(x.rows());
    Mat g(h.rows(), 2);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double m = std::max(h(i, 0), h(i, 1));
      const double e0 = std::exp(h(i, 0) - m), e1 = std::exp(h(i, 1) - m);
      const double lse = m + std::log(e0 + e1);
      const int label = y[static_cast<std::size_t>(i)];
      loss += lse - h(i, label);
      g(i, 0) = (e0 / (e0 + e1) - (label == 0 ? 1.0 : 0.0)) / n;
      g(i, 1) = (e1 / (e0 + e1) - (label == 1 ? 1.0 : 0.0)) / n;
    }
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return loss / n;
  }

  double loss(const Mat& x, std::span<const int> y) const {
    const Mat h = logits(x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double m = std::max(h(i, 0), h(i, 1));
      total += m + std::log(std::exp(h(i, 0) - m) + std::exp(h(i, 1) - m)) - h(i, y[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(h.rows());
  }

  std::vector<ParamRef>& params() { return params_; }

  std::vector<std::vector<double>> parameter_values() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : params_) out.emplace_back(p.value->data(), p.value->data() + p.value->size());
    return out;
  }
  void set_parameter_values(const std::vector<std::vector<double>>& values) {
    require(values.size() == params_.size(), "Network: parameter block count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(values[i].size() == static_cast<std::size_t>(params_[i].value->size()), "Network: parameter size mismatch");
      std::copy(values[i].begin(), values[i].end(), params_[i].value->data());
    }
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value->size());
    return n;
  }

 private:
  std::size_t steps_, features_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<ParamRef> params_;
};

/// SGD with momentum followed by proximal l2 shrinkage and l1 soft-thresholding of weights.
class ProximalSgd {
 public:
  ProximalSgd(double lr, double momentum, double l1, double l2) : lr_(lr), momentum_(momentum), l1_(l1), l2_(l2) {}
  void step(std::vector<ParamRef>& params) {
    if (velocity_.empty())
      for (auto& p : params) velocity_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat& w = *params[i].value;
      velocity_[i] = momentum_ * velocity_[i] - lr_ * *params[i].grad;
      w += velocity_[i];
      if (!params[i].is_weight) continue;
      if (l2_ > 0.0) w /= 1.0 + lr_ * l2_;
      if (l1_ > 0.0) {
        const double t = lr_ * l1_;
        w = w.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
      }
    }
  }

 private:
  double lr_, momentum_, l1_, l2_;
  std::vector<Mat> velocity_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  void step(std::vector<ParamRef>& params) {
    if (m_.empty())
      for (auto& p : params) {
        m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
      }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Mat& g = *params[i].grad;
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
      params[i].value->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Mat> m_, v_;
};

struct TrainingInfo {
  std::size_t epochs_run = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double best_dev_auc = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_epoch = 0;
  std::size_t synthetic_added = 0;
};

/// Feature plan the model was trained with.
struct FeatureSpec {
  std::size_t psi = 0;
  std::size_t frames = 0;
  IntervalAveraging averaging = IntervalAveraging::Linear;  // interval models only
};

struct TrainedModel {
  ModelSpec spec;
  std::size_t steps = 0;
  std::size_t features = 0;
  FeatureSpec feature_spec;
  Standardizer standardizer;
  std::shared_ptr<const Network> network;
  TrainingInfo info;
};

inline RowMat standardized_rows(const Standardizer& st, std::span<const FeatureMatrix> items) {
  require(!items.empty(), "standardized_rows: no items");
  const std::size_t width = items.front().rows * items.front().cols;
  RowMat x(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(items[i].rows * items[i].cols == width, "inconsistent feature matrix shapes");
    auto row = x.row(static_cast<Eigen::Index>(i));
    st.write_row(items[i], row);
  }
  return x;
}

inline void check_shape(const TrainedModel& model, const FeatureMatrix& m) {
  if (m.rows != model.steps || m.cols != model.features) {
    throw InvalidArgument("feature matrix shape (" + std::to_string(m.rows) + "," + std::to_string(m.cols) +
                          ") does not match model input (" + std::to_string(model.steps) + "," +
                          std::to_string(model.features) + ")");
  }
}

/// Probability of class 1 for each matrix. Dropout is inactive; the result is deterministic.
inline std::vector<double> predict_proba(const TrainedModel& model, std::span<const FeatureMatrix> items) {
  std::vector<double> out;
  out.reserve(items.size());
  constexpr std::size_t kChunk = 512;
  for (std::size_t b = 0; b < items.size(); b += kChunk) {
    const std::size_t e = std::min(items.size(), b + kChunk);
    for (std::size_t i = b; i < e; ++i) check_shape(model, items[i]);
    const Mat x = standardized_rows(model.standardizer, items.subspan(b, e - b));
    const Mat z = model.network->logits(x);
    for (Eigen::Index i = 0; i < z.rows(); ++i) out.push_back(softmax2(z(i, 0), z(i, 1)));
  }
  return out;
}

inline double predict_proba(const TrainedModel& model, const FeatureMatrix& m) {
  return predict_proba(model, std::span<const FeatureMatrix>(&m, 1)).front();
}

namespace detail {

inline void gather(const RowMat& x, std::span<const std::size_t> idx, Mat& out) {
  out.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
}

}  // namespace detail

/// Trains a classifier. SMOTE balances the standardized training rows; when a dev set
/// with both classes is given and early stopping is on, the epoch with the best dev AUC is kept.
inline TrainedModel train(const ModelSpec& spec, const LabeledSet& train_set, const LabeledSet* dev = nullptr) {
  require(!train_set.empty(), "train: empty training set");
  const std::size_t steps = train_set.items.front().rows, features = train_set.items.front().cols;
  for (const auto& m : train_set.items)
    require(m.rows == steps && m.cols == features, "train: inconsistent feature matrix shapes");
  require(spec.epochs >= 1 && spec.batch_size >= 1, "train: epochs and batch size must be positive");

  TrainedModel model;
  model.spec = spec;
  model.steps = steps;
  model.features = features;
  model.standardizer = Standardizer::fit(train_set.items, spec.standardization);

  RowMat x = standardized_rows(model.standardizer, train_set.items);
  std::vector<int> y = train_set.labels;

  const std::size_t pos = train_set.count(1), neg = train_set.size() - pos;
  if (spec.use_smote && pos > 0 && neg > 0 && pos != neg) {
    const int minority_label = pos < neg ? 1 : 0;
    const std::size_t deficit = pos < neg ? neg - pos : pos - neg;
    std::vector<Point> minority;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == minority_label) minority.emplace_back(x.row(static_cast<Eigen::Index>(i)).begin(), x.row(static_cast<Eigen::Index>(i)).end());
    if (minority.size() >= 2) {
      const auto synth = smote(minority, spec.smote_k, deficit, derive_seed(spec.seed, 0x5307e));
      const Eigen::Index base = x.rows();
      x.conservativeResize(base + static_cast<Eigen::Index>(synth.size()), Eigen::NoChange);
      for (std::size_t s = 0; s < synth.size(); ++s) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(base + static_cast<Eigen::Index>(s), c) = synth[s][static_cast<std::size_t>(c)];
        y.push_back(minority_label);
      }
      model.info.synthetic_added = synth.size();
    }
  }

  Rng init_rng(derive_seed(spec.seed, 0x1417));
  auto net = std::make_shared<Network>(spec, steps, features, init_rng);
  Rng shuffle_rng(derive_seed(spec.seed, 0x54aff1e));
  Rng dropout_rng(derive_seed(spec.seed, 0xd120));

  std::optional<ProximalSgd> sgd;
  std::optional<Adam> adam;
  switch (spec.family) {
    case Family::LR:
      sgd.emplace(spec.learning_rate, 0.0, spec.lr_strength * spec.lr_l1_ratio, spec.lr_strength * spec.lr_l2_ratio);
      break;
    case Family::MLP:
      sgd.emplace(spec.learning_rate, spec.mlp_momentum, 0.0, spec.mlp_l2);
      break;
    default:
      adam.emplace(spec.learning_rate);
  }

  std::optional<Mat> dev_x;
  bool dev_usable = false;
  if (dev && !dev->empty() && spec.early_stopping) {
    dev_usable = dev->count(1) > 0 && dev->count(1) < dev->size();
    if (dev_usable) dev_x = standardized_rows(model.standardizer, dev->items);
  }

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> yb;
  Mat xb;
  std::optional<std::vector<std::vector<double>>> best;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += spec.batch_size) {
      const std::size_t e = std::min(order.size(), b + spec.batch_size);
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      detail::gather(x, idx, xb);
      yb.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y[idx[i]];
      const double loss = net->forward_backward(xb, yb, dropout_rng);
      if (!std::isfinite(loss)) {
        throw TrainingDivergence("training diverged (non-finite loss) at epoch " + std::to_string(epoch) + " for " +
                                 describe(spec));
      }
      total += loss * static_cast<double>(idx.size());
      if (sgd) sgd->step(net->params());
      else adam->step(net->params());
    }
    model.info.final_loss = total / static_cast<double>(order.size());
    model.info.epochs_run = epoch + 1;
    if (dev_usable) {
      const Mat z = net->logits(*dev_x);
      std::vector<double> p(static_cast<std::size_t>(z.rows()));
      for (Eigen::Index i = 0; i < z.rows(); ++i) p[static_cast<std::size_t>(i)] = softmax2(z(i, 0), z(i, 1));
      const double auc = roc_auc(p, dev->labels);
      if (!(auc <= model.info.best_dev_auc)) {  // also true while best is NaN
        model.info.best_dev_auc = auc;
        model.info.best_epoch = epoch + 1;
        best = net->parameter_values();
      }
    }
  }
  if (best) net->set_parameter_values(*best);
  model.network = std::move(net);
  return model;
}

/// Max relative error between backprop gradients and central finite differences of the
/// cross-entropy of one sample. Relative error uses max(|a|,|n|,1e-6) as denominator.
inline double gradient_check(ModelSpec spec, const FeatureMatrix& sample, int label, double step = 1e-5) {
  spec.dropout = 0.0;
  Rng rng(derive_seed(spec.seed, 0x1417));
  Network net(spec, sample.rows, sample.cols, rng);
  Mat x(1, static_cast<Eigen::Index>(sample.data.size()));
  for (std::size_t i = 0; i < sample.data.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = sample.data[i];
  const std::vector<int> y{label};
  Rng unused(0);
  net.forward_backward(x, y, unused);
  double worst = 0.0;
  for (auto& p : net.params()) {
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      double& w = p.value->data()[i];
      const double saved = w;
      w = saved + step;
      const double up = net.loss(x, y);
      w = saved - step;
      const double down = net.loss(x, y);
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad->data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace bedocc::nn
