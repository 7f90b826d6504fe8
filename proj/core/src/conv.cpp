#include <Eigen/Core>
#include <algorithm>

#include "discont/autograd.hpp"
#include "discont/error.hpp"
#include "discont/ops.hpp"

namespace discont {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Sliding-window geometry of a zero-padded strided convolution that maps a
// `height x width` plane to `out_h x out_w`.
struct Window {
  std::size_t batch, channels, height, width, kh, kw, stride, out_h, out_w;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return batch * out_h * out_w; }
};

// cols[(c*kh+i)*kw+j][b*out_h*out_w + oy*out_w + ox] = x[b][c][oy*s+i][ox*s+j]
void im2col(const Window& w, std::span<const float> x, std::vector<float>& cols) {
  cols.assign(w.rows() * w.cols(), 0.0f);
  const std::size_t plane = w.out_h * w.out_w;
  for (std::size_t c = 0; c < w.channels; ++c)
    for (std::size_t i = 0; i < w.kh; ++i)
      for (std::size_t j = 0; j < w.kw; ++j) {
        float* row = cols.data() + ((c * w.kh + i) * w.kw + j) * w.cols();
        for (std::size_t b = 0; b < w.batch; ++b) {
          const float* src = x.data() + (b * w.channels + c) * w.height * w.width;
          float* dst = row + b * plane;
          for (std::size_t oy = 0; oy < w.out_h; ++oy) {
            const float* line = src + (oy * w.stride + i) * w.width + j;
            for (std::size_t ox = 0; ox < w.out_w; ++ox) dst[oy * w.out_w + ox] = line[ox * w.stride];
          }
        }
      }
}

// Adjoint of im2col: scatter-add columns back onto the plane.
void col2im(const Window& w, std::span<const float> cols, std::span<float> x) {
  const std::size_t plane = w.out_h * w.out_w;
  for (std::size_t c = 0; c < w.channels; ++c)
    for (std::size_t i = 0; i < w.kh; ++i)
      for (std::size_t j = 0; j < w.kw; ++j) {
        const float* row = cols.data() + ((c * w.kh + i) * w.kw + j) * w.cols();
        for (std::size_t b = 0; b < w.batch; ++b) {
          float* dst = x.data() + (b * w.channels + c) * w.height * w.width;
          const float* src = row + b * plane;
          for (std::size_t oy = 0; oy < w.out_h; ++oy) {
            float* line = dst + (oy * w.stride + i) * w.width + j;
            for (std::size_t ox = 0; ox < w.out_w; ++ox) line[ox * w.stride] += src[oy * w.out_w + ox];
          }
        }
      }
}

// [b][c][p] <-> [c][b*plane + p]
void batch_to_channel_major(std::span<const float> x, std::size_t batch, std::size_t channels, std::size_t plane,
                            std::span<float> out) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      std::copy_n(x.data() + (b * channels + c) * plane, plane, out.data() + (c * batch + b) * plane);
}

void channel_to_batch_major(std::span<const float> x, std::size_t batch, std::size_t channels, std::size_t plane,
                            std::span<float> out) {
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(x.data() + (c * batch + b) * plane, plane, out.data() + (b * channels + c) * plane);
}

void check_stride(std::size_t stride, std::string_view op) {
  if (stride == 0) throw ContractError(std::string(op) + ": stride must be positive");
}

void check_4d(const Tensor& t, std::string_view op, std::string_view what) {
  if (t.ndim() != 4) {
    throw DimensionError(std::string(op) + ": " + std::string(what) + " must be 4-D, got " +
                         shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  check_stride(stride, "conv2d");
  check_4d(input, "conv2d", "input");
  check_4d(weight, "conv2d", "weight");
  if (input.dim(1) != weight.dim(1)) {
    throw DimensionError("conv2d: input " + shape_to_string(input.shape()) + " channel count does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t out_ch = weight.dim(0);
  if (bias.numel() != out_ch) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t kh = weight.dim(2), kw = weight.dim(3);
  if (input.dim(2) < kh || input.dim(3) < kw) {
    throw DimensionError("conv2d: input " + shape_to_string(input.shape()) + " smaller than kernel " +
                         shape_to_string(weight.shape()));
  }
  Window w{input.dim(0),
           input.dim(1),
           input.dim(2),
           input.dim(3),
           kh,
           kw,
           stride,
           (input.dim(2) - kh) / stride + 1,
           (input.dim(3) - kw) / stride + 1};
  const std::size_t plane = w.out_h * w.out_w;

  std::vector<float> cols;
  im2col(w, input.values(), cols);
  std::vector<float> out_cm(out_ch * w.cols());
  {
    ConstMatMap wm(weight.values().data(), out_ch, w.rows());
    ConstMatMap cm(cols.data(), w.rows(), w.cols());
    MatMap om(out_cm.data(), out_ch, w.cols());
    om.noalias() = wm * cm;
    Eigen::Map<const Eigen::VectorXf> b(bias.values().data(), out_ch);
    om.colwise() += b;
  }
  std::vector<float> out(out_cm.size());
  channel_to_batch_major(out_cm, w.batch, out_ch, plane, out);

  return make_result(Shape{w.batch, out_ch, w.out_h, w.out_w}, std::move(out), {input, weight, bias},
                     [input, weight, bias, w, out_ch, plane, cols = std::move(cols)](std::span<const float>,
                                                                                     std::span<const float> g) {
                       std::vector<float> g_cm(g.size());
                       batch_to_channel_major(g, w.batch, out_ch, plane, g_cm);
                       ConstMatMap gm(g_cm.data(), out_ch, w.cols());
                       if (auto s = grad_sink(weight); !s.empty()) {
                         ConstMatMap cm(cols.data(), w.rows(), w.cols());
                         MatMap(s.data(), out_ch, w.rows()).noalias() += gm * cm.transpose();
                       }
                       if (auto s = grad_sink(bias); !s.empty()) {
                         const std::size_t cols_n = w.cols();
                         for (std::size_t o = 0; o < out_ch; ++o) {
                           double acc = 0.0;
                           for (std::size_t i = 0; i < cols_n; ++i) acc += g_cm[o * cols_n + i];
                           s[o] += static_cast<float>(acc);
                         }
                       }
                       if (auto s = grad_sink(input); !s.empty()) {
                         std::vector<float> dcols(w.rows() * w.cols());
                         ConstMatMap wm(weight.values().data(), out_ch, w.rows());
                         MatMap(dcols.data(), w.rows(), w.cols()).noalias() = wm.transpose() * gm;
                         col2im(w, dcols, s);
                       }
                     });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  check_stride(stride, "conv_transpose2d");
  check_4d(input, "conv_transpose2d", "input");
  check_4d(weight, "conv_transpose2d", "weight");
  if (input.dim(1) != weight.dim(0)) {
    throw DimensionError("conv_transpose2d: input " + shape_to_string(input.shape()) +
                         " channel count does not match weight " + shape_to_string(weight.shape()));
  }
  const std::size_t batch = input.dim(0), in_ch = input.dim(1), height = input.dim(2), width = input.dim(3);
  const std::size_t out_ch = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (bias.numel() != out_ch) {
    throw DimensionError("conv_transpose2d: bias " + shape_to_string(bias.shape()) + " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t out_h = (height - 1) * stride + kh, out_w = (width - 1) * stride + kw;
  // The output plane is the "input" side of the equivalent forward conv.
  Window w{batch, out_ch, out_h, out_w, kh, kw, stride, height, width};
  const std::size_t plane = height * width;

  std::vector<float> in_cm(input.numel());
  batch_to_channel_major(input.values(), batch, in_ch, plane, in_cm);
  std::vector<float> cols(w.rows() * w.cols());
  {
    ConstMatMap wm(weight.values().data(), in_ch, w.rows());
    ConstMatMap im(in_cm.data(), in_ch, w.cols());
    MatMap(cols.data(), w.rows(), w.cols()).noalias() = wm.transpose() * im;
  }
  std::vector<float> out(batch * out_ch * out_h * out_w, 0.0f);
  col2im(w, cols, out);
  {
    auto bv = bias.values();
    const std::size_t out_plane = out_h * out_w;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_ch; ++o) {
        float* p = out.data() + (b * out_ch + o) * out_plane;
        for (std::size_t q = 0; q < out_plane; ++q) p[q] += bv[o];
      }
  }

  return make_result(Shape{batch, out_ch, out_h, out_w}, std::move(out), {input, weight, bias},
                     [input, weight, bias, w, in_ch, plane, in_cm = std::move(in_cm)](std::span<const float>,
                                                                                      std::span<const float> g) {
                       std::vector<float> gcols;
                       im2col(w, g, gcols);
                       ConstMatMap gc(gcols.data(), w.rows(), w.cols());
                       if (auto s = grad_sink(weight); !s.empty()) {
                         ConstMatMap im(in_cm.data(), in_ch, w.cols());
                         MatMap(s.data(), in_ch, w.rows()).noalias() += im * gc.transpose();
                       }
                       if (auto s = grad_sink(bias); !s.empty()) {
                         const std::size_t out_plane = w.height * w.width;
                         for (std::size_t b = 0; b < w.batch; ++b)
                           for (std::size_t o = 0; o < w.channels; ++o) {
                             const float* p = g.data() + (b * w.channels + o) * out_plane;
                             double acc = 0.0;
                             for (std::size_t q = 0; q < out_plane; ++q) acc += p[q];
                             s[o] += static_cast<float>(acc);
                           }
                       }
                       if (auto s = grad_sink(input); !s.empty()) {
                         std::vector<float> d_cm(in_ch * w.cols());
                         ConstMatMap wm(weight.values().data(), in_ch, w.rows());
                         MatMap(d_cm.data(), in_ch, w.cols()).noalias() = wm * gc;
                         std::vector<float> d(s.size());
                         channel_to_batch_major(d_cm, w.batch, in_ch, plane, d);
                         for (std::size_t i = 0; i < s.size(); ++i) s[i] += d[i];
                       }
                     });
}

}  // namespace discont
