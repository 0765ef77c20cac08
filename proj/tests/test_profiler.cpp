#include <doctest.h>

#include <numeric>

#include "laid/error.hpp"
#include "laid/profiler.hpp"

using namespace laid;
using namespace laid::nn;

TEST_SUITE("profiler") {
  TEST_CASE("parameter counts") {
    CHECK(count_params(NetworkGraph({LayerSpec::linear(64, 2)})) == 130);
    CHECK(count_params(NetworkGraph({LayerSpec::conv2d(3, 8, 3, 1, 1), LayerSpec::global_avg_pool(),
                                     LayerSpec::linear(8, 2)})) == 3 * 3 * 3 * 8 + 8 + 18);
    // Per-layer formula summed by hand for the tiny detector.
    std::uint64_t hand = 3 * 3 * 3 * 8 + 8;
    const std::uint64_t w[] = {8, 16, 32, 64};
    for (int b = 0; b < 3; ++b) hand += (9 * w[b] + w[b]) + (w[b] * w[b + 1] + w[b + 1]);
    hand += 64 * 2 + 2;
    CHECK(count_params(tiny_detector_arch()) == hand);
    CHECK(count_params(NetworkGraph({LayerSpec::batchnorm(5), LayerSpec::pointwise(5, 2)})) == 10 + 12);
  }

  TEST_CASE("flop counts") {
    const auto lin = count_flops(NetworkGraph({LayerSpec::linear(64, 2)}), {64, 1, 1});
    CHECK(lin.flops == 256);
    CHECK(lin.macs == 128);
    const auto conv = count_flops(NetworkGraph({LayerSpec::conv2d(3, 8, 3, 1, 1), LayerSpec::global_avg_pool(),
                                                LayerSpec::linear(8, 2)}),
                                  {3, 4, 4});
    CHECK(conv.per_layer[0].flops == 2 * (3 * 3 * 3) * 8 * 16);
    CHECK(conv.per_layer[0].flops == 6912);
    const auto tiny = count_flops(tiny_detector_arch(), {3, 256, 256});
    CHECK(tiny.flops < 1000000000ull);
    CHECK(tiny.params < 10000000ull);
    CHECK_THROWS_AS(count_flops(tiny_detector_arch(), {1, 256, 256}), Error);
  }

  TEST_CASE("report totals equal per-layer sums") {
    const auto r = count_flops(tiny_detector_arch(), {3, 64, 64});
    std::uint64_t p = 0, f = 0, m = 0;
    for (const auto& l : r.per_layer) {
      p += l.params;
      f += l.flops;
      m += l.macs;
    }
    CHECK(p == r.params);
    CHECK(f == r.flops);
    CHECK(m == r.macs);
    CHECK(r.per_layer.size() == tiny_detector_arch().layers().size());
    const auto text = format_cost_report(r);
    CHECK(text.find("params=" + std::to_string(r.params)) != std::string::npos);
    CHECK(text.find("flops=" + std::to_string(r.flops)) != std::string::npos);
    CHECK(text.find("macs=") != std::string::npos);
  }

  TEST_CASE("doubling conv output channels doubles that layer's cost") {
    const auto a = count_flops(NetworkGraph({LayerSpec::conv2d(3, 4, 3, 1, 1), LayerSpec::pointwise(4, 2)}), {3, 8, 8});
    const auto b = count_flops(NetworkGraph({LayerSpec::conv2d(3, 8, 3, 1, 1), LayerSpec::pointwise(8, 2)}), {3, 8, 8});
    CHECK(b.per_layer[0].flops == 2 * a.per_layer[0].flops);
    CHECK(b.per_layer[0].params == 2 * a.per_layer[0].params);
  }

  TEST_CASE("stride-1 conv flops are linear in output area") {
    const NetworkGraph net({LayerSpec::conv2d(2, 2, 3, 1, 1)});
    const auto s = count_flops(net, {2, 5, 5}).flops;
    const auto l = count_flops(net, {2, 10, 10}).flops;
    CHECK(l == 4 * s);
  }
}
