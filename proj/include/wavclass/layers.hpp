/* Copyright 2026 The WavClass Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef WAVCLASS_LAYERS_HPP_
#define WAVCLASS_LAYERS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "wavclass/error.hpp"
#include "wavclass/tensor.hpp"

namespace wvc {

enum class Padding { kSame, kValid };
enum class Phase { kTrain, kInfer };

// Output extent for convolution/pooling. Same-padding follows the
// ceil(in/stride) rule; valid requires the kernel to fit.
inline int conv_out_dim(int in, int k, int s, Padding p) {
  if (p == Padding::kSame) return (in + s - 1) / s;
  if (in < k) throw_config("kernel exceeds input");
  return (in - k) / s + 1;
}
inline int pad_before(int in, int out, int k, int s) {
  const int total = (out - 1) * s + k - in;
  return total > 0 ? total / 2 : 0;
}

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<int> shape, bool train = true)
      : name(std::move(n)), value(shape), grad(std::move(shape)),
        trainable(train) {}
};

// One operation in the compiled network. Nodes own their activation (out)
// and activation-gradient buffers; backward() accumulates into the input
// nodes' gradients and into parameter gradients.
template <typename T>
class Node {
 public:
  virtual ~Node() = default;

  virtual void forward(Phase phase) = 0;
  virtual void backward() = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }

  // Per-example output shape (without the batch dimension).
  const std::vector<int>& item_shape() const { return item_shape_; }
  virtual void set_batch(int n);
  // Sizes the gradient buffer without clearing it; grad_ready tracks
  // whether a consumer has written it yet (first writer assigns).
  void ensure_grad();
  void zero_grad_once();

  std::string name;
  std::vector<Node<T>*> inputs;
  Tensor<T> out;
  Tensor<T> grad;
  // True when this node's output gradient is needed, i.e. some trainable
  // parameter sits on the path between the network input and this node.
  // Consumers skip the input-gradient pass for nodes where it is false.
  bool wants_grad = false;
  bool grad_ready = false;

 protected:
  std::vector<int> item_shape_;
  int batch_ = 0;
};

template <typename T>
class InputNode : public Node<T> {
 public:
  explicit InputNode(std::vector<int> item_shape);
  void forward(Phase) override {}
  void backward() override {}
};

template <typename T>
class ConvNode : public Node<T> {
 public:
  ConvNode(std::string name, Node<T>* in, int out_channels, int kh, int kw,
           int sh, int sw, Padding padding, bool use_bias);
  void forward(Phase) override;
  void backward() override;
  std::vector<Parameter<T>*> parameters() override;

  Parameter<T> weight;  // [Cout, Cin*kh*kw]
  Parameter<T> bias;    // [Cout], present iff use_bias
  int in_c, in_h, in_w, out_c, out_h, out_w;
  int kh, kw, sh, sw;
  Padding padding;
  bool use_bias;

 private:
  // Lowered columns for a block of examples laid side by side, so deep
  // layers with small spatial extent still present wide GEMMs.
  void im2col_block(const T* x_base, long x_plane_stride, int n_index, T* dst,
                    long ldp) const;
  void col2im_add_block(T* dx_base, long dx_plane_stride, int n_index,
                        const T* src, long ldp) const;
  void add_bias_rows();
  bool is_pointwise() const {
    return kh == 1 && kw == 1 && sh == 1 && sw == 1;
  }
  int chunk_examples() const;
  int pad_t_ = 0, pad_l_ = 0;
  std::vector<T> panel_, dcols_, wt_, wt2_;
};

enum class PoolKind { kMax, kAvg };

template <typename T>
class PoolNode : public Node<T> {
 public:
  PoolNode(std::string name, Node<T>* in, PoolKind kind, int kh, int kw,
           int sh, int sw, Padding padding);
  void forward(Phase) override;
  void backward() override;

  PoolKind kind;
  int in_c, in_h, in_w, out_h, out_w;
  int kh, kw, sh, sw;
  Padding padding;

 private:
  int pad_t_ = 0, pad_l_ = 0;
  std::vector<int> argmax_;  // flat input index per output cell (max pool)
};

template <typename T>
class DenseNode : public Node<T> {
 public:
  DenseNode(std::string name, Node<T>* in, int units, bool use_bias = true);
  void forward(Phase) override;
  void backward() override;
  std::vector<Parameter<T>*> parameters() override;

  Parameter<T> weight;  // [D, U]
  Parameter<T> bias;    // [U]
  int in_dim, units;
  bool use_bias;

 private:
  std::vector<T> wt_, xt_;
};

template <typename T>
class ReluNode : public Node<T> {
 public:
  ReluNode(std::string name, Node<T>* in);
  void forward(Phase) override;
  void backward() override;
};

template <typename T>
class SigmoidNode : public Node<T> {
 public:
  SigmoidNode(std::string name, Node<T>* in);
  void forward(Phase) override;
  void backward() override;
};

// Per-channel batch normalization over [N, C, H, W]. Training mode uses
// batch statistics and updates the moving averages; inference uses the
// stored moving statistics only. Training requires batch size >= 2.
template <typename T>
class BatchNormNode : public Node<T> {
 public:
  BatchNormNode(std::string name, Node<T>* in, double momentum = 0.99,
                double epsilon = 1e-3);
  void forward(Phase) override;
  void backward() override;
  std::vector<Parameter<T>*> parameters() override;

  Parameter<T> scale, shift;              // trainable
  Parameter<T> moving_mean, moving_var;   // buffers, not trained
  double momentum, epsilon;
  int channels;

 private:
  Phase last_phase_ = Phase::kTrain;
  std::vector<double> batch_mean_, batch_invstd_;
  int plane_ = 0;  // H*W
};

template <typename T>
class FlattenNode : public Node<T> {
 public:
  FlattenNode(std::string name, Node<T>* in);
  void forward(Phase) override;
  void backward() override;

 private:
  bool from_image_ = false;
  int channels_ = 1, plane_ = 0;
};

// Elementwise sum of all inputs (residual joins).
template <typename T>
class AddNode : public Node<T> {
 public:
  AddNode(std::string name, std::vector<Node<T>*> ins);
  void forward(Phase) override;
  void backward() override;
};

// Channel-axis concatenation of 4-D inputs (inception joins).
template <typename T>
class ConcatNode : public Node<T> {
 public:
  ConcatNode(std::string name, std::vector<Node<T>*> ins);
  void forward(Phase) override;
  void backward() override;

 private:
  std::vector<int> channel_offsets_;
};

// A compiled feed-forward DAG in topological (insertion) order.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  template <typename N, typename... Args>
  N* add(Args&&... args) {
    auto node = std::make_unique<N>(std::forward<Args>(args)...);
    N* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
  }

  InputNode<T>* input() const { return input_; }
  void set_input_node(InputNode<T>* in) { input_ = in; }
  Node<T>* output() const { return nodes_.back().get(); }
  const std::vector<std::unique_ptr<Node<T>>>& nodes() const { return nodes_; }

  // Marks nodes that read directly from the input so they skip the
  // input-gradient pass, and freezes the parameter list.
  void finalize();

  std::vector<Parameter<T>*>& parameters() { return params_; }

  // Copies n items of input()->item_shape() extent into the input node.
  void set_input(const T* data, int n);
  void forward(Phase phase);
  // dscores must match the output node's shape. Zeroes parameter and
  // activation gradients, then runs the recorded graph in reverse.
  void backward(const Tensor<T>& dscores);
  void zero_param_grads();

  int embedding_node = -1;  // index of the penultimate representation
  Node<T>* node_at(int i) const { return nodes_[static_cast<size_t>(i)].get(); }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  std::vector<std::unique_ptr<Node<T>>> nodes_;
  std::vector<Parameter<T>*> params_;
  InputNode<T>* input_ = nullptr;
  bool forward_recorded_ = false;
  Phase last_phase_ = Phase::kTrain;
};

}  // namespace wvc

#endif  // WAVCLASS_LAYERS_HPP_
