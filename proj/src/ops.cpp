#include "sarpn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "sarpn/errors.hpp"

namespace sarpn {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

bool is_pointwise(const ConvSpec& s) {
  return s.kernel_size == 1 && s.stride == 1 && s.padding == 0;
}

// Column buffer of shape (in*k*k) x (oh*ow).
void im2col(const FeatureMap& in, const ConvSpec& s, int oh, int ow,
            std::vector<double>& col) {
  const int k = s.kernel_size;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  col.assign(static_cast<std::size_t>(s.in_channels) * k * k * cols, 0.0);
  const int h = in.height();
  const int w = in.width();
  for (int c = 0; c < s.in_channels; ++c) {
    const double* plane = in.channel(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          double* dst = row + static_cast<std::size_t>(oy) * ow;
          if (s.stride == 1) {
            const int x_lo = std::max(0, s.padding - kx);
            const int x_hi = std::min(ow, w + s.padding - kx);
            for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] = src[ox - s.padding + kx];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * s.stride - s.padding + kx;
              if (ix >= 0 && ix < w) dst[ox] = src[ix];
            }
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& col, const ConvSpec& s, int oh,
                int ow, FeatureMap& grad_in) {
  const int k = s.kernel_size;
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  const int h = grad_in.height();
  const int w = grad_in.width();
  for (int c = 0; c < s.in_channels; ++c) {
    double* plane = grad_in.channel(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.padding + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          const double* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.padding + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Interpolation taps along one axis.
struct Tap {
  int lo;
  int hi;
  double t;
};

std::vector<Tap> resize_taps(int in_size, int out_size) {
  std::vector<Tap> taps(out_size);
  for (int o = 0; o < out_size; ++o) {
    const double src =
        out_size == 1 ? 0.0
                      : static_cast<double>(o) * (in_size - 1) / (out_size - 1);
    int lo = static_cast<int>(std::floor(src));
    lo = std::clamp(lo, 0, in_size - 1);
    const int hi = std::min(lo + 1, in_size - 1);
    taps[o] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

void ConvSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) {
    throw ConfigError("convolution channels must be positive");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("convolution kernel size must be a positive odd integer, got " +
                      std::to_string(kernel_size));
  }
  if (stride < 1) throw ConfigError("convolution stride must be positive");
  if (padding < 0) throw ConfigError("convolution padding must be non-negative");
}

LevelSize ConvSpec::output_size(int height, int width) const {
  validate();
  const int oh = (height + 2 * padding - kernel_size) / stride + 1;
  const int ow = (width + 2 * padding - kernel_size) / stride + 1;
  if (height + 2 * padding < kernel_size || width + 2 * padding < kernel_size ||
      oh < 1 || ow < 1) {
    throw ConfigError("convolution output size would be non-positive for input " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  return {oh, ow};
}

FeatureMap conv2d(const FeatureMap& input, const ConvSpec& spec,
                  std::span<const double> weights,
                  std::span<const double> bias) {
  if (input.channels() != spec.in_channels) {
    throw ConfigError("conv2d expects " + std::to_string(spec.in_channels) +
                      " input channels, got " + std::to_string(input.channels()));
  }
  const LevelSize out_size = spec.output_size(input.height(), input.width());
  if (weights.size() != spec.weight_count() ||
      bias.size() != static_cast<std::size_t>(spec.out_channels)) {
    throw ConfigError("conv2d parameter size mismatch");
  }
  FeatureMap out(spec.out_channels, out_size.height, out_size.width);
  const Eigen::Index pixels = static_cast<Eigen::Index>(out.plane_size());
  const Eigen::Index depth = static_cast<Eigen::Index>(
      spec.in_channels * spec.kernel_size * spec.kernel_size);
  ConstMatrixMap w(weights.data(), spec.out_channels, depth);
  MatrixMap o(out.data().data(), spec.out_channels, pixels);
  if (is_pointwise(spec)) {
    o.noalias() = w * ConstMatrixMap(input.data().data(), depth, pixels);
  } else {
    std::vector<double> col;
    im2col(input, spec, out_size.height, out_size.width, col);
    o.noalias() = w * ConstMatrixMap(col.data(), depth, pixels);
  }
  for (int c = 0; c < spec.out_channels; ++c) o.row(c).array() += bias[c];
  return out;
}

void conv2d_backward(const FeatureMap& input, const ConvSpec& spec,
                     std::span<const double> weights,
                     const FeatureMap& grad_output, FeatureMap* grad_input,
                     std::span<double> grad_weights,
                     std::span<double> grad_bias) {
  const Eigen::Index pixels = static_cast<Eigen::Index>(grad_output.plane_size());
  const Eigen::Index depth = static_cast<Eigen::Index>(
      spec.in_channels * spec.kernel_size * spec.kernel_size);
  ConstMatrixMap g(grad_output.data().data(), spec.out_channels, pixels);
  for (int c = 0; c < spec.out_channels; ++c) grad_bias[c] += g.row(c).sum();

  ConstMatrixMap w(weights.data(), spec.out_channels, depth);
  MatrixMap gw(grad_weights.data(), spec.out_channels, depth);
  if (is_pointwise(spec)) {
    ConstMatrixMap x(input.data().data(), depth, pixels);
    gw.noalias() += g * x.transpose();
    if (grad_input != nullptr) {
      MatrixMap gx(grad_input->data().data(), depth, pixels);
      gx.noalias() += w.transpose() * g;
    }
    return;
  }
  std::vector<double> col;
  im2col(input, spec, grad_output.height(), grad_output.width(), col);
  gw.noalias() += g * ConstMatrixMap(col.data(), depth, pixels).transpose();
  if (grad_input != nullptr) {
    MatrixMap gcol(col.data(), depth, pixels);
    gcol.noalias() = w.transpose() * g;
    col2im_add(col, spec, grad_output.height(), grad_output.width(), *grad_input);
  }
}

FeatureMap bilinear_resize(const FeatureMap& input, int out_height,
                           int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw ConfigError("bilinear_resize target size must be positive, got " +
                      std::to_string(out_height) + "x" + std::to_string(out_width));
  }
  if (out_height == input.height() && out_width == input.width()) return input;
  const auto ty = resize_taps(input.height(), out_height);
  const auto tx = resize_taps(input.width(), out_width);
  FeatureMap out(input.channels(), out_height, out_width);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < out_height; ++y) {
      const Tap& a = ty[y];
      for (int x = 0; x < out_width; ++x) {
        const Tap& b = tx[x];
        const double top = (1.0 - b.t) * input(c, a.lo, b.lo) + b.t * input(c, a.lo, b.hi);
        const double bottom = (1.0 - b.t) * input(c, a.hi, b.lo) + b.t * input(c, a.hi, b.hi);
        out(c, y, x) = (1.0 - a.t) * top + a.t * bottom;
      }
    }
  }
  return out;
}

void bilinear_resize_backward(const FeatureMap& grad_output,
                              FeatureMap& grad_input) {
  if (grad_output.same_spatial(grad_input)) {
    grad_input += grad_output;
    return;
  }
  const auto ty = resize_taps(grad_input.height(), grad_output.height());
  const auto tx = resize_taps(grad_input.width(), grad_output.width());
  for (int c = 0; c < grad_output.channels(); ++c) {
    for (int y = 0; y < grad_output.height(); ++y) {
      const Tap& a = ty[y];
      for (int x = 0; x < grad_output.width(); ++x) {
        const Tap& b = tx[x];
        const double g = grad_output(c, y, x);
        grad_input(c, a.lo, b.lo) += (1.0 - a.t) * (1.0 - b.t) * g;
        grad_input(c, a.lo, b.hi) += (1.0 - a.t) * b.t * g;
        grad_input(c, a.hi, b.lo) += a.t * (1.0 - b.t) * g;
        grad_input(c, a.hi, b.hi) += a.t * b.t * g;
      }
    }
  }
}

std::vector<double> global_avg_pool(const FeatureMap& input) {
  std::vector<double> out(input.channels());
  for (int c = 0; c < input.channels(); ++c) {
    double sum = 0.0;
    for (double v : input.channel(c)) sum += v;
    out[c] = sum / static_cast<double>(input.plane_size());
  }
  return out;
}

void global_avg_pool_backward(std::span<const double> grad_output,
                              FeatureMap& grad_input) {
  const double inv = 1.0 / static_cast<double>(grad_input.plane_size());
  for (int c = 0; c < grad_input.channels(); ++c) {
    for (double& v : grad_input.channel(c)) v += grad_output[c] * inv;
  }
}

FeatureMap concat_channels(std::span<const FeatureMap* const> inputs) {
  if (inputs.empty()) throw ConfigError("concat_channels needs at least one input");
  int channels = 0;
  for (const FeatureMap* m : inputs) {
    if (!m->same_spatial(*inputs.front())) {
      throw ConfigError("concat_channels spatial mismatch: " + m->shape_string() +
                        " vs " + inputs.front()->shape_string());
    }
    channels += m->channels();
  }
  FeatureMap out(channels, inputs.front()->height(), inputs.front()->width());
  auto dst = out.data().begin();
  for (const FeatureMap* m : inputs) dst = std::copy(m->data().begin(), m->data().end(), dst);
  return out;
}

FeatureMap concat_channels(const std::vector<FeatureMap>& inputs) {
  std::vector<const FeatureMap*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& m : inputs) ptrs.push_back(&m);
  return concat_channels(std::span<const FeatureMap* const>(ptrs));
}

FeatureMap slice_channels(const FeatureMap& input, int first, int count) {
  if (first < 0 || count < 1 || first + count > input.channels()) {
    throw ConfigError("slice_channels range out of bounds");
  }
  FeatureMap out(count, input.height(), input.width());
  const auto src = input.data().subspan(first * input.plane_size(), out.size());
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

FeatureMap relu(const FeatureMap& input) {
  FeatureMap out = input;
  // NaN passes through so a diverged network cannot look healthy downstream
  for (double& v : out.data()) v = (v > 0.0 || std::isnan(v)) ? v : 0.0;
  return out;
}

void relu_backward(const FeatureMap& input, const FeatureMap& grad_output,
                   FeatureMap& grad_input) {
  const auto x = input.data();
  const auto g = grad_output.data();
  auto gi = grad_input.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) gi[i] += g[i];
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FeatureMap sigmoid(const FeatureMap& input) {
  FeatureMap out = input;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

FeatureMap scale_channels(const FeatureMap& input, std::span<const double> gate) {
  if (gate.size() != static_cast<std::size_t>(input.channels())) {
    throw ConfigError("scale_channels gate size mismatch");
  }
  FeatureMap out = input;
  for (int c = 0; c < input.channels(); ++c) {
    for (double& v : out.channel(c)) v *= gate[c];
  }
  return out;
}

FeatureMap avg_pool2x2(const FeatureMap& input, bool skip_nonpositive) {
  if (input.height() % 2 != 0 || input.width() % 2 != 0) {
    throw ConfigError("2x2 pooling needs even dimensions, got " +
                      input.shape_string());
  }
  FeatureMap out(input.channels(), input.height() / 2, input.width() / 2);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        const double v[4] = {input(c, 2 * y, 2 * x), input(c, 2 * y, 2 * x + 1),
                             input(c, 2 * y + 1, 2 * x), input(c, 2 * y + 1, 2 * x + 1)};
        if (!skip_nonpositive) {
          out(c, y, x) = (v[0] + v[1] + v[2] + v[3]) / 4.0;
          continue;
        }
        double sum = 0.0;
        int n = 0;
        for (double s : v) {
          if (s > 0.0) {
            sum += s;
            ++n;
          }
        }
        out(c, y, x) = n > 0 ? sum / n : 0.0;
      }
    }
  }
  return out;
}

}  // namespace sarpn
