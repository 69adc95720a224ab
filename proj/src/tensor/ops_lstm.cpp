#include <memory>

#include "icaclf/error.hpp"
#include "icaclf/kernels.hpp"
#include "icaclf/ops.hpp"

namespace icaclf::inline ICACLF_ABI {

Tensor lstm(const Tensor& input, const Tensor& w_ih, const Tensor& w_hh, const Tensor& bias) {
  if (input.rank() != 3) {
    throw DimensionError("lstm: expected input [batch, time, features], got " + to_string(input.shape()));
  }
  if (w_hh.rank() != 2 || w_hh.dim(1) == 0) throw ParameterError("lstm: hidden size must be positive");
  kernels::LstmGeometry g;
  g.batch = input.dim(0);
  g.time = input.dim(1);
  g.features = input.dim(2);
  g.hidden = w_hh.dim(1);
  const std::size_t gates = 4 * g.hidden;
  if (w_hh.shape() != Shape{gates, g.hidden}) {
    throw DimensionError("lstm: w_hh shape " + to_string(w_hh.shape()));
  }
  if (w_ih.shape() != Shape{gates, g.features}) {
    throw DimensionError("lstm: w_ih shape " + to_string(w_ih.shape()) + " does not match " +
                         std::to_string(g.features) + " input features");
  }
  if (bias.shape() != Shape{gates}) throw DimensionError("lstm: bias shape " + to_string(bias.shape()));

  Tensor out(Shape{g.batch, g.hidden});
  auto trace = std::make_shared<kernels::LstmTrace>();
  kernels::lstm_forward(g, input.data().data(), w_ih.data().data(), w_hh.data().data(), bias.data().data(),
                        out.data().data(), *trace);
  if (needs_grad({&input, &w_ih, &w_hh, &bias})) {
    Tape::active()->record(out, [=]() {
      kernels::lstm_backward(g, input.data().data(), w_ih.data().data(), w_hh.data().data(), *trace,
                             out.grad().data(), input.requires_grad() ? input.grad().data() : nullptr,
                             w_ih.requires_grad() ? w_ih.grad().data() : nullptr,
                             w_hh.requires_grad() ? w_hh.grad().data() : nullptr,
                             bias.requires_grad() ? bias.grad().data() : nullptr);
    });
  }
  return out;
}

}  // namespace icaclf
