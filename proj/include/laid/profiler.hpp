#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "laid/nn.hpp"

namespace laid {

struct LayerCost {
  std::size_t index = 0;
  nn::LayerKind kind = nn::LayerKind::ReLU;
  nn::Shape output;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
};

// Static cost of one forward pass at a given input shape.
struct CostReport {
  nn::Shape input;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
  std::vector<LayerCost> per_layer;
};

std::uint64_t count_params(const nn::NetworkGraph& net);

// Convolution/linear: 2 FLOPs per MAC. ReLU and pooling: 1 FLOP per output
// element. BatchNorm: one MAC (2 FLOPs) per element.
CostReport count_flops(const nn::NetworkGraph& net, nn::Shape input);

// Aligned text table followed by `key=value` totals.
std::string format_cost_report(const CostReport& report);

}  // namespace laid
