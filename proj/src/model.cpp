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

#include "wavclass/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace wvc {
namespace {

constexpr double kBatchNormMomentum = 0.99;
constexpr double kBatchNormEpsilon = 1e-3;

template <typename T>
struct Compiler {
  Network<T>& net;

  Node<T>* chain(const std::vector<LayerSpec>& layers, Node<T>* in) {
    for (const LayerSpec& l : layers) in = layer(l, in);
    return in;
  }

  Node<T>* layer(const LayerSpec& l, Node<T>* in) {
    switch (l.kind) {
      case LayerKind::kConv:
        return net.template add<ConvNode<T>>(l.name, in, l.units, l.kh, l.kw,
                                             l.sh, l.sw, l.padding, l.use_bias);
      case LayerKind::kMaxPool:
        return net.template add<PoolNode<T>>(l.name, in, PoolKind::kMax, l.kh,
                                             l.kw, l.sh, l.sw, l.padding);
      case LayerKind::kAvgPool:
        return net.template add<PoolNode<T>>(l.name, in, PoolKind::kAvg, l.kh,
                                             l.kw, l.sh, l.sw, l.padding);
      case LayerKind::kDense:
        return net.template add<DenseNode<T>>(l.name, in, l.units, l.use_bias);
      case LayerKind::kRelu:
        return net.template add<ReluNode<T>>(l.name, in);
      case LayerKind::kSigmoid:
        return net.template add<SigmoidNode<T>>(l.name, in);
      case LayerKind::kBatchNorm:
        return net.template add<BatchNormNode<T>>(l.name, in, kBatchNormMomentum,
                                                  kBatchNormEpsilon);
      case LayerKind::kFlatten:
        return net.template add<FlattenNode<T>>(l.name, in);
      case LayerKind::kResidual: {
        Node<T>* main = chain(l.branches[0], in);
        Node<T>* shortcut = l.branches[1].empty() ? in : chain(l.branches[1], in);
        return net.template add<AddNode<T>>(l.name,
                                            std::vector<Node<T>*>{main, shortcut});
      }
      case LayerKind::kInception: {
        std::vector<Node<T>*> outs;
        outs.reserve(l.branches.size());
        for (const auto& b : l.branches) outs.push_back(chain(b, in));
        return net.template add<ConcatNode<T>>(l.name, std::move(outs));
      }
    }
    throw_config("unknown layer kind in compile");
  }
};

template <typename T>
void init_params(Network<T>& net, Rng& rng) {
  for (const auto& node : net.nodes()) {
    if (auto* conv = dynamic_cast<ConvNode<T>*>(node.get())) {
      const int fan_in = conv->in_c * conv->kh * conv->kw;
      const double stddev = std::sqrt(2.0 / fan_in);
      for (T& w : conv->weight.value.values)
        w = static_cast<T>(rng.normal(0.0, stddev));
    } else if (auto* fc = dynamic_cast<DenseNode<T>*>(node.get())) {
      const double stddev = std::sqrt(2.0 / fc->in_dim);
      for (T& w : fc->weight.value.values)
        w = static_cast<T>(rng.normal(0.0, stddev));
    }
  }
}

}  // namespace

template <typename T>
Network<T> compile_network(const ArchitectureSpec& spec, Rng& init_rng) {
  infer_output_shape(spec);  // validates before any allocation
  Network<T> net;
  auto* in = net.template add<InputNode<T>>(
      std::vector<int>{spec.input_shape[2], spec.input_shape[0], spec.input_shape[1]});
  net.set_input_node(in);
  Compiler<T> compiler{net};
  compiler.chain(spec.layers, in);
  net.finalize();
  init_params(net, init_rng);

  // The embedding is whatever feeds the final dense layer.
  int last_dense = -1;
  for (int i = 0; i < net.node_count(); ++i)
    if (dynamic_cast<DenseNode<T>*>(net.node_at(i))) last_dense = i;
  if (last_dense >= 0 && last_dense + 1 == net.node_count() - 1 &&
      dynamic_cast<SigmoidNode<T>*>(net.node_at(last_dense + 1))) {
    Node<T>* feeder = net.node_at(last_dense)->inputs[0];
    for (int i = 0; i < net.node_count(); ++i)
      if (net.node_at(i) == feeder) net.embedding_node = i;
  }
  return net;
}

template Network<float> compile_network<float>(const ArchitectureSpec&, Rng&);
template Network<double> compile_network<double>(const ArchitectureSpec&, Rng&);

Model build_model(const ArchitectureSpec& spec, uint64_t init_seed) {
  Rng rng(init_seed, "param-init");
  Model m{spec, compile_network<float>(spec, rng), spec_digest(spec)};
  return m;
}

const Tensor<float>& forward_to_embedding(Model& model, const float* input,
                                          int n) {
  if (model.net.embedding_node < 0) throw_config("no embedding layer");
  model.net.set_input(input, n);
  for (int i = 0; i <= model.net.embedding_node; ++i)
    model.net.node_at(i)->forward(Phase::kInfer);
  return model.net.node_at(model.net.embedding_node)->out;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

void put_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}
template <typename V>
void put_pod(std::ofstream& out, V v) {
  put_bytes(out, &v, sizeof(V));
}
void put_str(std::ofstream& out, const std::string& s) {
  put_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

void get_bytes(std::ifstream& in, void* p, size_t n, const std::string& path) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw_data("truncated checkpoint: " + path);
}
template <typename V>
V get_pod(std::ifstream& in, const std::string& path) {
  V v;
  get_bytes(in, &v, sizeof(V), path);
  return v;
}
std::string get_str(std::ifstream& in, const std::string& path) {
  const uint32_t n = get_pod<uint32_t>(in, path);
  std::string s(n, '\0');
  get_bytes(in, s.data(), n, path);
  return s;
}

constexpr uint32_t kCheckpointVersion = 1;
constexpr uint8_t kFlagAdam = 1;
constexpr uint8_t kFlagTrainer = 2;

}  // namespace

void save_checkpoint(const std::string& path, Model& model,
                     const AdamState<float>* adam,
                     const TrainerSnapshot* snapshot) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot open checkpoint for writing: " + path);
  out.write("WCK1", 4);
  put_pod<uint32_t>(out, kCheckpointVersion);
  put_pod<uint64_t>(out, model.digest);
  uint8_t flags = 0;
  if (adam) flags |= kFlagAdam;
  if (snapshot) flags |= kFlagTrainer;
  put_pod<uint8_t>(out, flags);

  auto& params = model.net.parameters();
  put_pod<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const Parameter<float>* p : params) {
    put_str(out, p->name);
    put_pod<uint32_t>(out, static_cast<uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) put_pod<int32_t>(out, d);
    put_bytes(out, p->value.data(), p->value.numel() * sizeof(float));
  }

  if (adam) {
    put_pod<int64_t>(out, adam->step_count);
    put_pod<uint32_t>(out, static_cast<uint32_t>(adam->first_moment.size()));
    for (size_t i = 0; i < adam->first_moment.size(); ++i) {
      put_bytes(out, adam->first_moment[i].data(),
                adam->first_moment[i].numel() * sizeof(float));
      put_bytes(out, adam->second_moment[i].data(),
                adam->second_moment[i].numel() * sizeof(float));
    }
  }
  if (snapshot) {
    put_pod<int64_t>(out, snapshot->step);
    for (uint64_t w : snapshot->rng_state) put_pod<uint64_t>(out, w);
  }
  if (!out) throw_data("failed writing checkpoint: " + path);
}

void load_checkpoint(const std::string& path, Model& model,
                     AdamState<float>* adam, TrainerSnapshot* snapshot) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open checkpoint: " + path);
  char magic[4];
  get_bytes(in, magic, 4, path);
  if (std::memcmp(magic, "WCK1", 4) != 0)
    throw_data("bad checkpoint magic: " + path);
  if (get_pod<uint32_t>(in, path) != kCheckpointVersion)
    throw_data("unsupported checkpoint version: " + path);
  const uint64_t digest = get_pod<uint64_t>(in, path);
  if (digest != model.digest)
    throw_data("checkpoint architecture digest mismatch: " + path);
  const uint8_t flags = get_pod<uint8_t>(in, path);

  auto& params = model.net.parameters();
  const uint32_t count = get_pod<uint32_t>(in, path);
  if (count != params.size())
    throw_data("checkpoint parameter count mismatch: " + path);
  for (Parameter<float>* p : params) {
    const std::string name = get_str(in, path);
    if (name != p->name)
      throw_data("checkpoint parameter order mismatch at " + name);
    const uint32_t ndims = get_pod<uint32_t>(in, path);
    std::vector<int> dims(ndims);
    for (uint32_t i = 0; i < ndims; ++i) dims[i] = get_pod<int32_t>(in, path);
    if (dims != p->value.shape)
      throw_data("checkpoint shape mismatch for " + name);
    get_bytes(in, p->value.data(), p->value.numel() * sizeof(float), path);
  }

  if (flags & kFlagAdam) {
    const int64_t steps = get_pod<int64_t>(in, path);
    const uint32_t n = get_pod<uint32_t>(in, path);
    if (adam) {
      adam->init(params);
      if (n != adam->first_moment.size())
        throw_data("checkpoint optimizer state mismatch: " + path);
      adam->step_count = steps;
      for (size_t i = 0; i < adam->first_moment.size(); ++i) {
        get_bytes(in, adam->first_moment[i].data(),
                  adam->first_moment[i].numel() * sizeof(float), path);
        get_bytes(in, adam->second_moment[i].data(),
                  adam->second_moment[i].numel() * sizeof(float), path);
      }
    } else {
      // Skip the section.
      size_t total = 0;
      for (const Parameter<float>* p : params)
        if (p->trainable) total += p->value.numel() * 2 * sizeof(float);
      in.seekg(static_cast<std::streamoff>(total), std::ios::cur);
    }
  } else if (adam) {
    throw_data("checkpoint has no optimizer state: " + path);
  }

  if (flags & kFlagTrainer) {
    TrainerSnapshot snap;
    snap.step = get_pod<int64_t>(in, path);
    for (uint64_t& w : snap.rng_state) w = get_pod<uint64_t>(in, path);
    if (snapshot) *snapshot = snap;
  } else if (snapshot) {
    throw_data("checkpoint has no trainer state: " + path);
  }
}

uint64_t checkpoint_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open checkpoint: " + path);
  char magic[4];
  get_bytes(in, magic, 4, path);
  if (std::memcmp(magic, "WCK1", 4) != 0)
    throw_data("bad checkpoint magic: " + path);
  (void)get_pod<uint32_t>(in, path);
  return get_pod<uint64_t>(in, path);
}

}  // namespace wvc
