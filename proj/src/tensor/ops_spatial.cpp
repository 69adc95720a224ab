#include <algorithm>

#include "icaclf/error.hpp"
#include "icaclf/hash.hpp"
#include "icaclf/kernels.hpp"
#include "icaclf/ops.hpp"

namespace icaclf::inline ICACLF_ABI {

namespace {

// Right-aligns the axes into three, padding the leading ones with `fill`.
kernels::Extent3 to_extent3(std::span<const std::size_t> axes, std::size_t fill = 1) {
  kernels::Extent3 e{fill, fill, fill};
  std::copy(axes.begin(), axes.end(), e.begin() + static_cast<std::ptrdiff_t>(3 - axes.size()));
  return e;
}

void check_rank(const Tensor& input, std::size_t spatial_rank, const char* op) {
  if (spatial_rank != 1 && spatial_rank != 3) {
    throw DimensionError(std::string(op) + ": spatial rank must be 1 or 3");
  }
  if (input.rank() != spatial_rank + 2) {
    throw DimensionError(std::string(op) + ": expected input of rank " + std::to_string(spatial_rank + 2) +
                         ", got shape " + to_string(input.shape()));
  }
}

}  // namespace

std::size_t ConvSpec::kernel_volume() const {
  std::size_t v = 1;
  for (auto k : kernel) v *= k;
  return v;
}

std::vector<std::size_t> ConvSpec::output_extents(std::span<const std::size_t> input) const {
  if (kernel.size() != static_cast<std::size_t>(rank) || input.size() != kernel.size()) {
    throw DimensionError("conv: kernel rank does not match input rank");
  }
  std::vector<std::size_t> out(kernel.size());
  for (std::size_t axis = 0; axis < kernel.size(); ++axis) {
    const std::size_t s = stride_at(axis);
    if (kernel[axis] == 0 || s == 0) throw DimensionError("conv: kernel and stride must be positive");
    if (input[axis] < kernel[axis]) {
      throw DimensionError("conv: spatial axis " + std::to_string(axis) + " has extent " +
                           std::to_string(input[axis]) + " smaller than kernel " + std::to_string(kernel[axis]));
    }
    out[axis] = (input[axis] - kernel[axis]) / s + 1;
  }
  return out;
}

Tensor conv(const Tensor& input, const Tensor& weight, const Tensor& bias, const ConvSpec& spec) {
  const auto rank = static_cast<std::size_t>(spec.rank);
  check_rank(input, rank, "conv");
  if (input.dim(1) != spec.in_channels) {
    throw DimensionError("conv: input channel axis is " + std::to_string(input.dim(1)) + ", spec expects " +
                         std::to_string(spec.in_channels));
  }
  Shape wshape{spec.out_channels, spec.in_channels};
  wshape.insert(wshape.end(), spec.kernel.begin(), spec.kernel.end());
  if (weight.shape() != wshape) {
    throw DimensionError("conv: weight shape " + to_string(weight.shape()) + " != expected " + to_string(wshape));
  }
  if (bias.defined() && bias.shape() != Shape{spec.out_channels}) {
    throw DimensionError("conv: bias shape " + to_string(bias.shape()));
  }
  const auto& ishape = input.shape();
  std::span<const std::size_t> in_extents(ishape.data() + 2, rank);
  const auto out_extents = spec.output_extents(in_extents);

  kernels::ConvGeometry g;
  g.batch = ishape[0];
  g.in_channels = spec.in_channels;
  g.out_channels = spec.out_channels;
  g.input = to_extent3(in_extents);
  g.kernel = to_extent3(spec.kernel);
  std::vector<std::size_t> strides(rank);
  for (std::size_t a = 0; a < rank; ++a) strides[a] = spec.stride_at(a);
  g.stride = to_extent3(strides);
  g.output = to_extent3(out_extents);

  Shape oshape{g.batch, g.out_channels};
  oshape.insert(oshape.end(), out_extents.begin(), out_extents.end());
  Tensor out(oshape);
  kernels::conv_forward(g, input.data().data(), weight.data().data(),
                        bias.defined() ? bias.data().data() : nullptr, out.data().data());

  if (needs_grad({&input, &weight, &bias})) {
    Tape::active()->record(out, [=]() {
      kernels::conv_backward(g, input.data().data(), weight.data().data(), out.grad().data(),
                             input.requires_grad() ? input.grad().data() : nullptr,
                             weight.requires_grad() ? weight.grad().data() : nullptr,
                             bias.defined() && bias.requires_grad() ? bias.grad().data() : nullptr);
    });
  }
  return out;
}

Tensor max_pool(const Tensor& input, std::span<const std::size_t> window,
                std::span<const std::size_t> stride) {
  const std::size_t rank = window.size();
  check_rank(input, rank, "max_pool");
  if (stride.size() != rank) throw DimensionError("max_pool: stride rank differs from window rank");
  const auto& ishape = input.shape();
  std::vector<std::size_t> out_extents(rank);
  for (std::size_t a = 0; a < rank; ++a) {
    const std::size_t extent = ishape[2 + a];
    if (window[a] == 0 || stride[a] == 0) throw DimensionError("max_pool: window and stride must be positive");
    if (window[a] > extent) {
      throw DimensionError("max_pool: window " + std::to_string(window[a]) + " exceeds extent " +
                           std::to_string(extent) + " on spatial axis " + std::to_string(a));
    }
    out_extents[a] = (extent - window[a]) / stride[a] + 1;
  }
  kernels::PoolGeometry g;
  g.planes = ishape[0] * ishape[1];
  g.input = to_extent3(std::span<const std::size_t>(ishape.data() + 2, rank));
  g.window = to_extent3(window);
  g.stride = to_extent3(stride);
  g.output = to_extent3(out_extents);

  Shape oshape{ishape[0], ishape[1]};
  oshape.insert(oshape.end(), out_extents.begin(), out_extents.end());
  Tensor out(oshape);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  kernels::max_pool_forward(g, input.data().data(), out.data().data(), argmax->data());
  if (NonSmoothProbe::active()) {
    Fnv1a h;
    h.update(argmax->data(), argmax->size() * sizeof(std::uint32_t));
    NonSmoothProbe::mix(h.digest());
  }
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      kernels::max_pool_backward(g, out.grad().data(), argmax->data(), input.grad().data());
    });
  }
  return out;
}

Tensor center_crop(const Tensor& input, std::span<const std::size_t> crop) {
  const std::size_t rank = crop.size();
  check_rank(input, rank, "center_crop");
  const auto& ishape = input.shape();
  Shape oshape{ishape[0], ishape[1]};
  for (std::size_t a = 0; a < rank; ++a) {
    if (2 * crop[a] >= ishape[2 + a]) {
      throw DimensionError("center_crop: crop " + std::to_string(crop[a]) + " empties spatial axis " +
                           std::to_string(a));
    }
    oshape.push_back(ishape[2 + a] - 2 * crop[a]);
  }
  const auto in_e = to_extent3(std::span<const std::size_t>(ishape.data() + 2, rank));
  const auto out_e = to_extent3(std::span<const std::size_t>(oshape.data() + 2, rank));
  const auto off = to_extent3(crop, 0);
  const std::size_t planes = ishape[0] * ishape[1];
  Tensor out(oshape);

  // Calls fn(out_index, in_index) for every retained element.
  auto for_each = [=](auto&& fn) {
    std::size_t o = 0;
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t z = 0; z < out_e[0]; ++z)
        for (std::size_t y = 0; y < out_e[1]; ++y) {
          const std::size_t row = ((p * in_e[0] + z + off[0]) * in_e[1] + y + off[1]) * in_e[2] + off[2];
          for (std::size_t x = 0; x < out_e[2]; ++x, ++o) fn(o, row + x);
        }
  };
  auto src = input.data();
  auto dst = out.data();
  for_each([&](std::size_t o, std::size_t i) { dst[o] = src[i]; });
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dout = out.grad();
      auto din = input.grad();
      for_each([&](std::size_t oi, std::size_t ii) { din[ii] += dout[oi]; });
    });
  }
  return out;
}

Tensor frame_sequence(const Tensor& input, std::size_t frame) {
  if (input.rank() != 3 || input.dim(1) != 1) {
    throw DimensionError("frame_sequence: expected [batch, 1, length], got " + to_string(input.shape()));
  }
  if (frame == 0) throw ParameterError("frame_sequence: frame must be positive");
  const std::size_t batch = input.dim(0);
  const std::size_t length = input.dim(2);
  const std::size_t steps = length / frame;
  if (steps == 0) {
    throw DimensionError("frame_sequence: length " + std::to_string(length) + " shorter than frame " +
                         std::to_string(frame));
  }
  Tensor out(Shape{batch, steps, frame});
  auto src = input.data();
  auto dst = out.data();
  const std::size_t used = steps * frame;
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(n * length), used,
                dst.begin() + static_cast<std::ptrdiff_t>(n * used));
  }
  if (needs_grad({&input})) {
    Tape::active()->record(out, [=]() {
      auto dout = out.grad();
      auto din = input.grad();
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < used; ++i) din[n * length + i] += dout[n * used + i];
    });
  }
  return out;
}

}  // namespace icaclf
