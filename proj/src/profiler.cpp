#include "laid/profiler.hpp"

#include <cstdio>

namespace laid {

std::uint64_t count_params(const nn::NetworkGraph& net) {
  std::uint64_t total = 0;
  for (const auto& l : net.layers()) total += l.param_count();
  return total;
}

CostReport count_flops(const nn::NetworkGraph& net, nn::Shape input) {
  using nn::LayerKind;
  CostReport r;
  r.input = input;
  nn::Shape s = input;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const nn::LayerSpec& l = net.layers()[i];
    const nn::Shape os = l.output_shape(s);
    LayerCost c;
    c.index = i;
    c.kind = l.kind;
    c.output = os;
    c.params = l.param_count();
    const std::uint64_t out_area = os.h * os.w;
    switch (l.kind) {
      case LayerKind::Conv2d:
        c.macs = l.kernel * l.kernel * l.in * l.out * out_area;
        c.flops = 2 * c.macs;
        break;
      case LayerKind::DepthwiseConv2d:
        c.macs = l.kernel * l.kernel * l.in * out_area;
        c.flops = 2 * c.macs;
        break;
      case LayerKind::PointwiseConv2d:
        c.macs = l.in * l.out * out_area;
        c.flops = 2 * c.macs;
        break;
      case LayerKind::Linear:
        c.macs = l.in * l.out;
        c.flops = 2 * c.macs;
        break;
      case LayerKind::BatchNorm2d:
        c.macs = os.size();
        c.flops = 2 * c.macs;
        break;
      case LayerKind::ReLU:
      case LayerKind::MaxPool2d:
      case LayerKind::GlobalAvgPool:
        c.flops = os.size();
        break;
    }
    r.params += c.params;
    r.macs += c.macs;
    r.flops += c.flops;
    r.per_layer.push_back(c);
    s = os;
  }
  return r;
}

std::string format_cost_report(const CostReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %-16s %-14s %10s %12s %12s\n", "layer", "kind", "output",
                "params", "MACs", "FLOPs");
  out += line;
  for (const LayerCost& c : r.per_layer) {
    char shape[48];
    std::snprintf(shape, sizeof shape, "%zux%zux%zu", c.output.c, c.output.h, c.output.w);
    std::snprintf(line, sizeof line, "%-5zu %-16s %-14s %10llu %12llu %12llu\n", c.index,
                  std::string(nn::to_string(c.kind)).c_str(), shape,
                  static_cast<unsigned long long>(c.params),
                  static_cast<unsigned long long>(c.macs),
                  static_cast<unsigned long long>(c.flops));
    out += line;
  }
  std::snprintf(line, sizeof line,
                "input=%zux%zux%zu\nparams=%llu\nmacs=%llu\nflops=%llu\ngflops=%.6f\n", r.input.c,
                r.input.h, r.input.w, static_cast<unsigned long long>(r.params),
                static_cast<unsigned long long>(r.macs), static_cast<unsigned long long>(r.flops),
                static_cast<double>(r.flops) / 1e9);
  out += line;
  return out;
}

}  // namespace laid
