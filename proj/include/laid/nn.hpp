#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "laid/image.hpp"
#include "laid/rng.hpp"

namespace laid::nn {

enum class LayerKind : std::uint32_t {
  Conv2d = 0,
  DepthwiseConv2d = 1,
  PointwiseConv2d = 2,
  ReLU = 3,
  MaxPool2d = 4,
  GlobalAvgPool = 5,
  Linear = 6,
  BatchNorm2d = 7,
};

std::string_view to_string(LayerKind kind);

// Per-sample activation shape (channels, height, width). Linear outputs use h = w = 1.
struct Shape {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t size() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t in = 0;   // input channels / features
  std::size_t out = 0;  // output channels / features
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                          std::size_t pad);
  static LayerSpec depthwise(std::size_t channels, std::size_t k, std::size_t stride,
                             std::size_t pad);
  static LayerSpec pointwise(std::size_t in, std::size_t out);
  static LayerSpec relu();
  static LayerSpec maxpool(std::size_t k, std::size_t stride, std::size_t pad = 0);
  static LayerSpec global_avg_pool();
  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec batchnorm(std::size_t channels);

  // Trainable scalars (weights + biases, or BatchNorm gamma/beta).
  std::size_t param_count() const;
  // Non-trainable state (BatchNorm running mean/var).
  std::size_t buffer_count() const;
  // Throws a dimension error when `input` is incompatible.
  Shape output_shape(Shape input) const;
  void validate() const;

  bool operator==(const LayerSpec&) const = default;
};

// Ordered layers plus the flat parameter store. The final layer must produce
// exactly two outputs per sample.
class NetworkGraph {
 public:
  NetworkGraph() = default;
  explicit NetworkGraph(std::vector<LayerSpec> layers);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::span<float> params() { return params_; }
  std::span<const float> params() const { return params_; }
  std::span<float> buffers() { return buffers_; }
  std::span<const float> buffers() const { return buffers_; }

  std::size_t param_offset(std::size_t layer) const { return param_offsets_[layer]; }
  std::size_t buffer_offset(std::size_t layer) const { return buffer_offsets_[layer]; }

  // Shape after the final layer; throws on incompatible chains.
  Shape output_shape(Shape input) const;

  // He-uniform weights, zero biases, unit BatchNorm scale, unit running variance.
  void init(Rng& rng);

  bool operator==(const NetworkGraph&) const = default;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> param_offsets_;
  std::vector<std::size_t> buffer_offsets_;
  std::vector<float> params_;
  std::vector<float> buffers_;
};

enum class Mode { Train, Eval };

// NCHW batch of network inputs already scaled to [0, 1].
struct Batch {
  std::size_t n = 0;
  Shape shape;
  std::vector<float> data;
};

// Byte-range tensors are divided by 255; unit-range tensors pass through.
Batch make_batch(std::span<const ImageTensor> images, std::span<const std::size_t> indices);
Batch make_batch(std::span<const ImageTensor> images);

// Everything backward needs from one forward pass.
template <typename T>
struct Activations {
  std::size_t n = 0;
  Mode mode = Mode::Eval;
  std::vector<Shape> shapes;          // shapes[i] = input shape of layer i; back() = output
  std::vector<std::vector<T>> values; // values[i] = input of layer i; back() = output
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<std::vector<T>> bn_xhat;
  std::vector<std::vector<T>> bn_inv_std;
  bool valid() const { return n > 0 && values.size() == shapes.size() && !values.empty(); }
};

// Generic forward over an explicit parameter span; returns n x out_size outputs.
// `buffers` may be empty in Eval mode only for graphs without BatchNorm. Train
// mode updates BatchNorm running statistics when `buffers` is non-empty.
template <typename T>
std::vector<T> run_forward(const NetworkGraph& net, std::span<const T> params,
                           std::span<T> buffers, std::span<const T> input, std::size_t n,
                           Shape in_shape, Mode mode, Activations<T>* cache);

// Gradient of sum(grad_out * output) w.r.t. params; optionally w.r.t. the input.
template <typename T>
std::vector<T> run_backward(const NetworkGraph& net, std::span<const T> params,
                            const Activations<T>& cache, std::span<const T> grad_out,
                            std::vector<T>* grad_input = nullptr);

extern template std::vector<float> run_forward<float>(const NetworkGraph&, std::span<const float>,
                                                      std::span<float>, std::span<const float>,
                                                      std::size_t, Shape, Mode,
                                                      Activations<float>*);
extern template std::vector<double> run_forward<double>(const NetworkGraph&,
                                                        std::span<const double>,
                                                        std::span<double>,
                                                        std::span<const double>, std::size_t,
                                                        Shape, Mode, Activations<double>*);
extern template std::vector<float> run_backward<float>(const NetworkGraph&,
                                                       std::span<const float>,
                                                       const Activations<float>&,
                                                       std::span<const float>,
                                                       std::vector<float>*);
extern template std::vector<double> run_backward<double>(const NetworkGraph&,
                                                         std::span<const double>,
                                                         const Activations<double>&,
                                                         std::span<const double>,
                                                         std::vector<double>*);

// Inference: logits (n x 2), eval mode.
std::vector<float> forward(const NetworkGraph& net, const Batch& batch);
// Training-mode forward that fills `cache` for backward.
std::vector<float> forward(NetworkGraph& net, const Batch& batch, Activations<float>& cache);
// Parameter gradient; throws a state error when `cache` is missing.
std::vector<float> backward(const NetworkGraph& net, const Activations<float>& cache,
                            std::span<const float> grad_logits);

// Class decision from a logit pair; ties go to class 0.
inline int predict(float logit0, float logit1) { return logit1 > logit0 ? 1 : 0; }
// Positive-class (label 1) probability.
double positive_probability(float logit0, float logit1);

template <typename T>
struct LossResult {
  double loss = 0.0;
  std::vector<T> grad;  // n x 2
};

// Mean softmax cross-entropy over two logits (the two-output form of BCE).
template <typename T>
LossResult<T> bce_loss(std::span<const T> logits, std::span<const std::uint8_t> labels);

extern template LossResult<float> bce_loss<float>(std::span<const float>,
                                                  std::span<const std::uint8_t>);
extern template LossResult<double> bce_loss<double>(std::span<const double>,
                                                    std::span<const std::uint8_t>);

struct OptimizerState {
  double lr = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

// Bias-corrected Adam. Throws a numeric error (and leaves params untouched) on
// non-finite gradients.
void adam_step(OptimizerState& state, std::span<float> params, std::span<const float> grads);

// Reduce-on-plateau in maximize mode.
struct SchedulerState {
  int patience = 5;
  double factor = 0.1;
  double best_metric = -std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;
};

double scheduler_step(SchedulerState& state, double val_acc, double lr);

struct EarlyStopState {
  int window = 10;
  double best_val_acc = -std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  int best_epoch = 0;
  std::vector<float> best_params;
  std::vector<float> best_buffers;

  // Records the epoch result; returns true when training should stop.
  bool update(int epoch, double val_acc, const NetworkGraph& net);
};

struct Dataset {
  std::span<const ImageTensor> images;
  std::span<const std::uint8_t> labels;
  std::size_t size() const { return images.size(); }
};

struct TrainConfig {
  int max_epochs = 100;
  std::size_t batch_size = 32;
  double lr = 1e-4;
  double weight_decay = 0.0;
  int scheduler_patience = 5;
  double scheduler_factor = 0.1;
  int early_stop_window = 10;
  std::uint64_t seed = 0;
  // Called after each epoch; may be empty.
  std::function<void(int epoch, double loss, double val_acc, double lr)> on_epoch;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  bool stopped_early = false;
};

struct TrainedModel {
  NetworkGraph net;
  TrainLog log;
};

// Percentage of samples whose argmax matches the label.
double evaluate_accuracy(const NetworkGraph& net, const Dataset& data, std::size_t batch_size = 64);

// Positive-class probabilities for every sample, in order.
std::vector<double> predict_scores(const NetworkGraph& net, std::span<const ImageTensor> images,
                                   std::size_t batch_size = 64);

TrainedModel train(NetworkGraph net, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config);

// Stem conv 3->8 stride 2, three depthwise-separable stride-2 blocks
// (8->16->32->64), global average pool, linear 64->2.
NetworkGraph tiny_detector_arch();

// Checkpoint file: "LAIDCKPT", version, layer table, float32 LE payload
// (params then buffers), trailing u64 total file length.
std::vector<std::uint8_t> serialize_checkpoint(const NetworkGraph& net);
NetworkGraph deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const NetworkGraph& net, const std::string& path);
NetworkGraph load_checkpoint(const std::string& path);

}  // namespace laid::nn
