#pragma once

// Layers for the from-scratch classifiers. Every layer maps a batch matrix
// (batch x width) to another; sequence and image layers interpret the input
// width as a flattened row-major (steps x features) or (channels x H x W) block.
//
// forward() caches what backward() needs and is single-writer; infer() is const
// and cache-free so a trained network can be shared across threads.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "bedocc/common.hpp"

namespace bedocc::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::RowVectorXd;

struct ParamRef {
  Mat* value = nullptr;
  Mat* grad = nullptr;
  bool is_weight = true;  // biases are never regularized
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Mat forward(const Mat& x, bool training, Rng& rng) = 0;
  virtual Mat backward(const Mat& grad_out) = 0;
  virtual Mat infer(const Mat& x) const = 0;
  virtual void collect(std::vector<ParamRef>&) {}
  virtual std::size_t out_width() const = 0;
};

inline void init_uniform(Mat& w, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
}

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Rng& rng, double gain = 6.0)
      : w_(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
        b_(Mat::Zero(1, static_cast<Eigen::Index>(out))),
        dw_(Mat::Zero(w_.rows(), w_.cols())),
        db_(Mat::Zero(1, b_.cols())) {
    init_uniform(w_, std::sqrt(gain / static_cast<double>(in)), rng);
  }

  Mat forward(const Mat& x, bool, Rng&) override {
    x_ = x;
    return infer(x);
  }
  Mat infer(const Mat& x) const override {
    Mat y = x * w_;
    y.rowwise() += b_.row(0);
    return y;
  }
  Mat backward(const Mat& g) override {
    dw_.noalias() += x_.transpose() * g;
    db_ += g.colwise().sum();
    return g * w_.transpose();
  }
  void collect(std::vector<ParamRef>& out) override {
    out.push_back({&w_, &dw_, true});
    out.push_back({&b_, &db_, false});
  }
  std::size_t out_width() const override { return static_cast<std::size_t>(w_.cols()); }

 private:
  Mat w_, b_, dw_, db_, x_;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::size_t width) : width_(width) {}
  Mat forward(const Mat& x, bool, Rng&) override {
    mask_ = (x.array() > 0.0).cast<double>();
    return x.cwiseMax(0.0);
  }
  Mat infer(const Mat& x) const override { return x.cwiseMax(0.0); }
  Mat backward(const Mat& g) override { return g.cwiseProduct(mask_); }
  std::size_t out_width() const override { return width_; }

 private:
  std::size_t width_;
  Mat mask_;
};

/// Inverted dropout: surviving activations are scaled by 1/(1-rate) during training.
class Dropout final : public Layer {
 public:
  Dropout(std::size_t width, double rate) : width_(width), rate_(rate) {}
  Mat forward(const Mat& x, bool training, Rng& rng) override {
    if (!training || rate_ <= 0.0) {
      mask_.resize(0, 0);
      return x;
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    mask_.resize(x.rows(), x.cols());
    const double scale = 1.0 / (1.0 - rate_);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) mask_(i, j) = keep(rng) ? scale : 0.0;
    return x.cwiseProduct(mask_);
  }
  Mat infer(const Mat& x) const override { return x; }
  Mat backward(const Mat& g) override { return mask_.size() ? Mat(g.cwiseProduct(mask_)) : g; }
  std::size_t out_width() const override { return width_; }

 private:
  std::size_t width_;
  double rate_;
  Mat mask_;
};

/// Single LSTM layer over a (steps x features) sequence; emits the final hidden state.
/// Gate order in the packed weights: input, forget, cell, output.
class Lstm final : public Layer {
 public:
  Lstm(std::size_t steps, std::size_t features, std::size_t units, Rng& rng)
      : steps_(steps), features_(features), units_(units) {
    const auto f = static_cast<Eigen::Index>(features), u = static_cast<Eigen::Index>(units);
    wx_.resize(f, 4 * u);
    wh_.resize(u, 4 * u);
    const double limit = 1.0 / std::sqrt(static_cast<double>(units));
    init_uniform(wx_, limit, rng);
    init_uniform(wh_, limit, rng);
    b_ = Mat::Zero(1, 4 * u);
    b_.block(0, u, 1, u).setOnes();  // forget-gate bias
    dwx_ = Mat::Zero(wx_.rows(), wx_.cols());
    dwh_ = Mat::Zero(wh_.rows(), wh_.cols());
    db_ = Mat::Zero(1, b_.cols());
  }

  Mat forward(const Mat& x, bool, Rng&) override {
    const Eigen::Index batch = x.rows(), u = static_cast<Eigen::Index>(units_);
    x_ = x;
    gates_.assign(steps_, Mat());
    cells_.assign(steps_ + 1, Mat::Zero(batch, u));
    hidden_.assign(steps_ + 1, Mat::Zero(batch, u));
    for (std::size_t t = 0; t < steps_; ++t) {
      Mat z = step_input(x, t) * wx_;
      z.noalias() += hidden_[t] * wh_;
      z.rowwise() += b_.row(0);
      activate(z);
      cells_[t + 1] = z.middleCols(u, u).cwiseProduct(cells_[t]) +
                      z.leftCols(u).cwiseProduct(z.middleCols(2 * u, u));
      hidden_[t + 1] = z.rightCols(u).cwiseProduct(cells_[t + 1].array().tanh().matrix());
      gates_[t] = std::move(z);
    }
    return hidden_[steps_];
  }

  Mat infer(const Mat& x) const override {
    const Eigen::Index batch = x.rows(), u = static_cast<Eigen::Index>(units_);
    Mat c = Mat::Zero(batch, u), h = Mat::Zero(batch, u);
    for (std::size_t t = 0; t < steps_; ++t) {
      Mat z = step_input(x, t) * wx_;
      z.noalias() += h * wh_;
      z.rowwise() += b_.row(0);
      activate(z);
      c = z.middleCols(u, u).cwiseProduct(c) + z.leftCols(u).cwiseProduct(z.middleCols(2 * u, u));
      h = z.rightCols(u).cwiseProduct(c.array().tanh().matrix());
    }
    return h;
  }

  Mat backward(const Mat& g) override {
    const Eigen::Index u = static_cast<Eigen::Index>(units_);
    Mat dh = g;
    Mat dc = Mat::Zero(g.rows(), u);
    Mat dz(g.rows(), 4 * u);
    for (std::size_t t = steps_; t-- > 0;) {
      const Mat& z = gates_[t];
      const auto i = z.leftCols(u).array();
      const auto f = z.middleCols(u, u).array();
      const auto gg = z.middleCols(2 * u, u).array();
      const auto o = z.rightCols(u).array();
      const Eigen::ArrayXXd tc = cells_[t + 1].array().tanh();
      dc.array() += dh.array() * o * (1.0 - tc * tc);
      dz.leftCols(u).array() = dc.array() * gg * i * (1.0 - i);
      dz.middleCols(u, u).array() = dc.array() * cells_[t].array() * f * (1.0 - f);
      dz.middleCols(2 * u, u).array() = dc.array() * i * (1.0 - gg * gg);
      dz.rightCols(u).array() = dh.array() * tc * o * (1.0 - o);
      dwx_.noalias() += step_input(x_, t).transpose() * dz;
      dwh_.noalias() += hidden_[t].transpose() * dz;
      db_ += dz.colwise().sum();
      dh = dz * wh_.transpose();
      dc.array() *= f;
    }
    return Mat();  // first layer: input gradient not needed
  }

  void collect(std::vector<ParamRef>& out) override {
    out.push_back({&wx_, &dwx_, true});
    out.push_back({&wh_, &dwh_, true});
    out.push_back({&b_, &db_, false});
  }
  std::size_t out_width() const override { return units_; }

 private:
  Mat::ConstColsBlockXpr step_input(const Mat& x, std::size_t t) const {
    return x.middleCols(static_cast<Eigen::Index>(t * features_), static_cast<Eigen::Index>(features_));
  }
  void activate(Mat& z) const {
    const Eigen::Index u = static_cast<Eigen::Index>(units_);
    z.leftCols(2 * u) = (1.0 + (-z.leftCols(2 * u).array()).exp()).inverse().matrix();
    z.middleCols(2 * u, u) = z.middleCols(2 * u, u).array().tanh().matrix();
    z.rightCols(u) = (1.0 + (-z.rightCols(u).array()).exp()).inverse().matrix();
  }

  std::size_t steps_, features_, units_;
  Mat wx_, wh_, b_, dwx_, dwh_, db_;
  Mat x_;
  std::vector<Mat> gates_, cells_, hidden_;
};

struct ImageShape {
  std::size_t channels = 1, height = 1, width = 1;
  std::size_t size() const { return channels * height * width; }
};

/// 'Valid' 2-D convolution with square kernels, im2col per sample.
class Conv2d final : public Layer {
 public:
  Conv2d(ImageShape in, std::size_t filters, std::size_t kernel, Rng& rng)
      : in_(in), filters_(filters), kernel_(kernel) {
    require(in.height >= kernel && in.width >= kernel, "Conv2d: kernel larger than input");
    out_ = {filters, in.height - kernel + 1, in.width - kernel + 1};
    const auto fan_in = static_cast<Eigen::Index>(in.channels * kernel * kernel);
    w_.resize(fan_in, static_cast<Eigen::Index>(filters));
    init_uniform(w_, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
    b_ = Mat::Zero(1, static_cast<Eigen::Index>(filters));
    dw_ = Mat::Zero(w_.rows(), w_.cols());
    db_ = Mat::Zero(1, b_.cols());
  }

  ImageShape out_shape() const { return out_; }

  Mat forward(const Mat& x, bool, Rng&) override {
    cols_.resize(static_cast<std::size_t>(x.rows()));
    Mat y(x.rows(), static_cast<Eigen::Index>(out_.size()));
    for (Eigen::Index s = 0; s < x.rows(); ++s) {
      cols_[static_cast<std::size_t>(s)] = im2col(x.row(s));
      emit(cols_[static_cast<std::size_t>(s)], y, s);
    }
    return y;
  }
  Mat infer(const Mat& x) const override {
    Mat y(x.rows(), static_cast<Eigen::Index>(out_.size()));
    for (Eigen::Index s = 0; s < x.rows(); ++s) emit(im2col(x.row(s)), y, s);
    return y;
  }
  Mat backward(const Mat& g) override {
    const auto positions = static_cast<Eigen::Index>(out_.height * out_.width);
    Mat dx = Mat::Zero(g.rows(), static_cast<Eigen::Index>(in_.size()));
    for (Eigen::Index s = 0; s < g.rows(); ++s) {
      // gradient w.r.t. the (positions x filters) output block of this sample
      Mat go(positions, static_cast<Eigen::Index>(filters_));
      for (Eigen::Index f = 0; f < go.cols(); ++f) go.col(f) = g.row(s).segment(f * positions, positions).transpose();
      const Mat& cols = cols_[static_cast<std::size_t>(s)];
      dw_.noalias() += cols.transpose() * go;
      db_ += go.colwise().sum();
      const Mat dcols = go * w_.transpose();
      col2im(dcols, dx, s);
    }
    return dx;
  }
  void collect(std::vector<ParamRef>& out) override {
    out.push_back({&w_, &dw_, true});
    out.push_back({&b_, &db_, false});
  }
  std::size_t out_width() const override { return out_.size(); }

 private:
  template <typename Row>
  Mat im2col(const Row& x) const {
    const std::size_t oh = out_.height, ow = out_.width, k = kernel_;
    Mat cols(static_cast<Eigen::Index>(oh * ow), static_cast<Eigen::Index>(in_.channels * k * k));
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const auto r = static_cast<Eigen::Index>(y * ow + xx);
        Eigen::Index c = 0;
        for (std::size_t ch = 0; ch < in_.channels; ++ch)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
              cols(r, c++) = x(static_cast<Eigen::Index>((ch * in_.height + y + ky) * in_.width + xx + kx));
      }
    return cols;
  }
  void emit(const Mat& cols, Mat& y, Eigen::Index s) const {
    Mat o = cols * w_;
    o.rowwise() += b_.row(0);
    const Eigen::Index positions = o.rows();
    for (Eigen::Index f = 0; f < o.cols(); ++f) y.row(s).segment(f * positions, positions) = o.col(f).transpose();
  }
  void col2im(const Mat& dcols, Mat& dx, Eigen::Index s) const {
    const std::size_t oh = out_.height, ow = out_.width, k = kernel_;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const auto r = static_cast<Eigen::Index>(y * ow + xx);
        Eigen::Index c = 0;
        for (std::size_t ch = 0; ch < in_.channels; ++ch)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
              dx(s, static_cast<Eigen::Index>((ch * in_.height + y + ky) * in_.width + xx + kx)) += dcols(r, c++);
      }
  }

  ImageShape in_, out_;
  std::size_t filters_, kernel_;
  Mat w_, b_, dw_, db_;
  std::vector<Mat> cols_;
};

/// 2x2 max-pooling with stride 2 (floor on odd sizes).
class MaxPool2 final : public Layer {
 public:
  explicit MaxPool2(ImageShape in) : in_(in) {
    require(in.height >= 2 && in.width >= 2, "MaxPool2: input smaller than the pooling window");
    out_ = {in.channels, in.height / 2, in.width / 2};
  }
  ImageShape out_shape() const { return out_; }

  Mat forward(const Mat& x, bool, Rng&) override {
    argmax_.resize(x.rows(), static_cast<Eigen::Index>(out_.size()));
    return pool(x, &argmax_);
  }
  Mat infer(const Mat& x) const override { return pool(x, nullptr); }
  Mat backward(const Mat& g) override {
    Mat dx = Mat::Zero(g.rows(), static_cast<Eigen::Index>(in_.size()));
    for (Eigen::Index s = 0; s < g.rows(); ++s)
      for (Eigen::Index j = 0; j < g.cols(); ++j) dx(s, argmax_(s, j)) += g(s, j);
    return dx;
  }
  std::size_t out_width() const override { return out_.size(); }

 private:
  Mat pool(const Mat& x, Eigen::MatrixXi* argmax) const {
    Mat y(x.rows(), static_cast<Eigen::Index>(out_.size()));
    for (Eigen::Index s = 0; s < x.rows(); ++s)
      for (std::size_t ch = 0; ch < out_.channels; ++ch)
        for (std::size_t oy = 0; oy < out_.height; ++oy)
          for (std::size_t ox = 0; ox < out_.width; ++ox) {
            double best = -std::numeric_limits<double>::infinity();
            Eigen::Index best_idx = 0;
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const auto idx = static_cast<Eigen::Index>((ch * in_.height + 2 * oy + dy) * in_.width + 2 * ox + dx);
                if (x(s, idx) > best) {
                  best = x(s, idx);
                  best_idx = idx;
                }
              }
            const auto o = static_cast<Eigen::Index>((ch * out_.height + oy) * out_.width + ox);
            y(s, o) = best;
            if (argmax) (*argmax)(s, o) = static_cast<int>(best_idx);
          }
    return y;
  }

  ImageShape in_, out_;
  Eigen::MatrixXi argmax_;
};

}  // namespace bedocc::nn
