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

#include "wavclass/arch.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "wavclass/rng.hpp"

namespace wvc {
namespace {

using nlohmann::json;

LayerSpec conv(std::string name, int ch, int kh, int kw, int sh = 1,
               int sw = 1, Padding pad = Padding::kSame, bool bias = false) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.name = std::move(name);
  l.units = ch;
  l.kh = kh;
  l.kw = kw;
  l.sh = sh;
  l.sw = sw;
  l.padding = pad;
  l.use_bias = bias;
  return l;
}

LayerSpec pool(LayerKind kind, std::string name, int kh, int kw, int sh,
               int sw, Padding pad) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  l.kh = kh;
  l.kw = kw;
  l.sh = sh;
  l.sw = sw;
  l.padding = pad;
  return l;
}

LayerSpec dense(std::string name, int units) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.name = std::move(name);
  l.units = units;
  return l;
}

LayerSpec simple(LayerKind kind, std::string name) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

// conv + batchnorm + relu, the repeating unit of every CNN here.
void add_cbr(std::vector<LayerSpec>& out, const std::string& name, int ch,
             int kh, int kw, int sh = 1, int sw = 1,
             Padding pad = Padding::kSame) {
  out.push_back(conv(name, ch, kh, kw, sh, sw, pad));
  out.push_back(simple(LayerKind::kBatchNorm, name + ".bn"));
  out.push_back(simple(LayerKind::kRelu, name + ".relu"));
}

std::vector<LayerSpec> cbr(const std::string& name, int ch, int kh, int kw,
                           int sh = 1, int sw = 1,
                           Padding pad = Padding::kSame) {
  std::vector<LayerSpec> out;
  add_cbr(out, name, ch, kh, kw, sh, sw, pad);
  return out;
}

void append(std::vector<LayerSpec>& dst, std::vector<LayerSpec> src) {
  for (auto& l : src) dst.push_back(std::move(l));
}

// --- shape walk ------------------------------------------------------------

[[noreturn]] void bad_arch(const std::string& layer, const std::string& why) {
  throw Error(ErrorKind::kConfig,
              "invalid architecture: layer '" + layer + "': " + why);
}

FeatureShape walk_layer(const LayerSpec& l, FeatureShape in);

FeatureShape walk_chain(const std::vector<LayerSpec>& layers, FeatureShape in) {
  for (const LayerSpec& l : layers) in = walk_layer(l, in);
  return in;
}

FeatureShape walk_layer(const LayerSpec& l, FeatureShape in) {
  switch (l.kind) {
    case LayerKind::kConv: {
      if (in.is_flat()) bad_arch(l.name, "conv after flatten");
      FeatureShape out;
      out.h = conv_out_dim(in.h, l.kh, l.sh, l.padding);
      out.w = conv_out_dim(in.w, l.kw, l.sw, l.padding);
      out.c = l.units;
      if (l.padding == Padding::kValid && (in.h < l.kh || in.w < l.kw))
        bad_arch(l.name, "kernel exceeds input");
      return out;
    }
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool: {
      if (in.is_flat()) bad_arch(l.name, "pool after flatten");
      FeatureShape out = in;
      out.h = conv_out_dim(in.h, l.kh, l.sh, l.padding);
      out.w = conv_out_dim(in.w, l.kw, l.sw, l.padding);
      return out;
    }
    case LayerKind::kDense: {
      if (!in.is_flat()) bad_arch(l.name, "dense requires flattened input");
      FeatureShape out;
      out.flat = l.units;
      return out;
    }
    case LayerKind::kRelu:
    case LayerKind::kSigmoid:
      return in;
    case LayerKind::kBatchNorm:
      if (in.is_flat()) bad_arch(l.name, "batchnorm after flatten");
      return in;
    case LayerKind::kFlatten: {
      FeatureShape out;
      out.flat = in.is_flat() ? in.flat : in.h * in.w * in.c;
      return out;
    }
    case LayerKind::kResidual: {
      if (l.branches.size() != 2) bad_arch(l.name, "residual needs two branches");
      const FeatureShape a = walk_chain(l.branches[0], in);
      const FeatureShape b = l.branches[1].empty() ? in : walk_chain(l.branches[1], in);
      if (a.h != b.h || a.w != b.w || a.c != b.c)
        bad_arch(l.name, "residual branches disagree on shape");
      return a;
    }
    case LayerKind::kInception: {
      if (l.branches.size() < 2) bad_arch(l.name, "inception needs branches");
      FeatureShape out = walk_chain(l.branches[0], in);
      for (size_t i = 1; i < l.branches.size(); ++i) {
        const FeatureShape b = walk_chain(l.branches[i], in);
        if (b.h != out.h || b.w != out.w)
          bad_arch(l.name, "inception branches disagree on spatial extent");
        out.c += b.c;
      }
      return out;
    }
  }
  bad_arch(l.name, "unknown layer kind");
}

void validate_head(const ArchitectureSpec& spec) {
  if (spec.layers.size() < 2 ||
      spec.layers.back().kind != LayerKind::kSigmoid ||
      spec.layers[spec.layers.size() - 2].kind != LayerKind::kDense ||
      spec.layers[spec.layers.size() - 2].units != spec.num_labels)
    throw Error(ErrorKind::kConfig,
                "invalid architecture: expected dense(num_labels) + sigmoid head");
}

// --- cost walk --------------------------------------------------------------

std::string shape_str(const FeatureShape& s) {
  if (s.is_flat()) return "(" + std::to_string(s.flat) + ")";
  return "(" + std::to_string(s.h) + "x" + std::to_string(s.w) + "x" +
         std::to_string(s.c) + ")";
}

FeatureShape cost_layer(const LayerSpec& l, FeatureShape in,
                        const std::string& prefix, CostReport& report);

FeatureShape cost_chain(const std::vector<LayerSpec>& layers, FeatureShape in,
                        const std::string& prefix, CostReport& report) {
  for (const LayerSpec& l : layers) in = cost_layer(l, in, prefix, report);
  return in;
}

FeatureShape cost_layer(const LayerSpec& l, FeatureShape in,
                        const std::string& prefix, CostReport& report) {
  const std::string name = prefix.empty() ? l.name : prefix + "/" + l.name;
  CostRow row;
  row.name = name;
  FeatureShape out = in;
  switch (l.kind) {
    case LayerKind::kConv: {
      out = walk_layer(l, in);
      row.weights = static_cast<int64_t>(l.kh) * l.kw * in.c * l.units;
      row.biases_bn = l.use_bias ? l.units : 0;
      row.multiplies = static_cast<int64_t>(out.h) * out.w * row.weights;
      break;
    }
    case LayerKind::kDense: {
      out = walk_layer(l, in);
      row.weights = static_cast<int64_t>(in.flat) * l.units;
      row.biases_bn = l.units;
      row.multiplies = row.weights;
      break;
    }
    case LayerKind::kBatchNorm:
      row.biases_bn = 2 * in.c;
      break;
    case LayerKind::kResidual: {
      const FeatureShape a = cost_chain(l.branches[0], in, name, report);
      if (!l.branches[1].empty()) cost_chain(l.branches[1], in, name, report);
      out = walk_layer(l, in);
      row.name = name + " (add)";
      (void)a;
      break;
    }
    case LayerKind::kInception: {
      for (size_t i = 0; i < l.branches.size(); ++i)
        cost_chain(l.branches[i], in, name + "/b" + std::to_string(i), report);
      out = walk_layer(l, in);
      row.name = name + " (concat)";
      break;
    }
    default:
      out = walk_layer(l, in);
      break;
  }
  row.output_shape = shape_str(out);
  report.rows.push_back(std::move(row));
  return out;
}

}  // namespace

FeatureShape infer_output_shape(const ArchitectureSpec& spec) {
  validate_head(spec);
  FeatureShape in;
  in.h = spec.input_shape[0];
  in.w = spec.input_shape[1];
  in.c = spec.input_shape[2];
  const FeatureShape out = walk_chain(spec.layers, in);
  if (!out.is_flat() || out.flat != spec.num_labels)
    throw Error(ErrorKind::kConfig,
                "invalid architecture: output is not (num_labels,)");
  return out;
}

int embedding_dim(const ArchitectureSpec& spec) {
  validate_head(spec);
  ArchitectureSpec trimmed = spec;
  trimmed.layers.pop_back();  // sigmoid
  trimmed.layers.pop_back();  // output dense
  FeatureShape in;
  in.h = spec.input_shape[0];
  in.w = spec.input_shape[1];
  in.c = spec.input_shape[2];
  const FeatureShape out = walk_chain(trimmed.layers, in);
  if (!out.is_flat())
    throw Error(ErrorKind::kConfig, "no embedding layer");
  return out.flat;
}

CostReport count_costs(const ArchitectureSpec& spec) {
  infer_output_shape(spec);  // throws "invalid architecture" on failure
  CostReport report;
  report.architecture = spec.name;
  FeatureShape in;
  in.h = spec.input_shape[0];
  in.w = spec.input_shape[1];
  in.c = spec.input_shape[2];
  cost_chain(spec.layers, in, "", report);
  for (const CostRow& r : report.rows) {
    report.total_weights += r.weights;
    report.total_biases_bn += r.biases_bn;
    report.total_multiplies += r.multiplies;
  }
  if (spec.name.rfind("alexnet", 0) == 0)
    report.notes.push_back(
        "reference totals of 37.3M weights / 767M multiplies are not "
        "reproducible from this topology under any padding convention; "
        "derived counts are reported alongside the reference");
  return report;
}

std::string CostReport::to_csv() const {
  std::ostringstream out;
  out << "layer,output_shape,weights,biases_bn,multiplies\n";
  for (const CostRow& r : rows)
    out << r.name << "," << r.output_shape << "," << r.weights << ","
        << r.biases_bn << "," << r.multiplies << "\n";
  out << "total,," << total_weights << "," << total_biases_bn << ","
      << total_multiplies << "\n";
  return out.str();
}

// --- builders ---------------------------------------------------------------

ArchitectureSpec build_fully_connected(int num_layers, int units,
                                       int num_labels) {
  if (num_layers < 1 || units < 1 || num_labels < 1)
    throw_config("fully connected builder needs positive sizes");
  ArchitectureSpec spec;
  spec.name = "fc" + std::to_string(num_layers) + "x" + std::to_string(units);
  spec.num_labels = num_labels;
  spec.layers.push_back(simple(LayerKind::kFlatten, "flatten"));
  for (int i = 1; i <= num_layers; ++i) {
    const std::string name = "fc" + std::to_string(i);
    spec.layers.push_back(dense(name, units));
    spec.layers.push_back(simple(LayerKind::kRelu, name + ".relu"));
  }
  spec.layers.push_back(dense("logits", num_labels));
  spec.layers.push_back(simple(LayerKind::kSigmoid, "output"));
  return spec;
}

ArchitectureSpec build_alexnet_audio(int num_labels) {
  ArchitectureSpec spec;
  spec.name = "alexnet-audio";
  spec.num_labels = num_labels;
  auto& L = spec.layers;
  add_cbr(L, "conv1", 96, 11, 11, 2, 1);  // stride 2x1 on the 96x64 input
  L.push_back(pool(LayerKind::kMaxPool, "pool1", 3, 3, 2, 2, Padding::kValid));
  add_cbr(L, "conv2", 256, 5, 5);
  L.push_back(pool(LayerKind::kMaxPool, "pool2", 3, 3, 2, 2, Padding::kValid));
  add_cbr(L, "conv3", 384, 3, 3);
  add_cbr(L, "conv4", 384, 3, 3);
  add_cbr(L, "conv5", 256, 3, 3);
  L.push_back(pool(LayerKind::kMaxPool, "pool5", 3, 3, 2, 2, Padding::kValid));
  L.push_back(simple(LayerKind::kFlatten, "flatten"));
  L.push_back(dense("fc6", 4096));
  L.push_back(simple(LayerKind::kRelu, "fc6.relu"));
  L.push_back(dense("fc7", 4096));
  L.push_back(simple(LayerKind::kRelu, "fc7.relu"));
  L.push_back(dense("logits", num_labels));
  L.push_back(simple(LayerKind::kSigmoid, "output"));
  return spec;
}

ArchitectureSpec build_vgg_audio(int num_labels) {
  ArchitectureSpec spec;
  spec.name = "vgg-audio";
  spec.num_labels = num_labels;
  auto& L = spec.layers;
  const int stage_channels[5] = {64, 128, 256, 512, 512};
  const int stage_convs[5] = {2, 2, 4, 4, 4};
  for (int s = 0; s < 5; ++s) {
    for (int i = 1; i <= stage_convs[s]; ++i)
      add_cbr(L, "conv" + std::to_string(s + 1) + "_" + std::to_string(i),
              stage_channels[s], 3, 3);
    L.push_back(pool(LayerKind::kMaxPool, "pool" + std::to_string(s + 1), 2, 2,
                     2, 2, Padding::kValid));
  }
  L.push_back(simple(LayerKind::kFlatten, "flatten"));
  L.push_back(dense("fc6", 4096));
  L.push_back(simple(LayerKind::kRelu, "fc6.relu"));
  L.push_back(dense("fc7", 4096));
  L.push_back(simple(LayerKind::kRelu, "fc7.relu"));
  L.push_back(dense("logits", num_labels));
  L.push_back(simple(LayerKind::kSigmoid, "output"));
  return spec;
}

namespace {

LayerSpec resnet_block(const std::string& name, int in_c, int mid_c, int out_c,
                       int stride) {
  LayerSpec block;
  block.kind = LayerKind::kResidual;
  block.name = name;
  std::vector<LayerSpec> main;
  append(main, cbr(name + ".a", mid_c, 1, 1, stride, stride));
  append(main, cbr(name + ".b", mid_c, 3, 3));
  main.push_back(conv(name + ".c", out_c, 1, 1));
  main.push_back(simple(LayerKind::kBatchNorm, name + ".c.bn"));
  std::vector<LayerSpec> shortcut;
  if (in_c != out_c || stride != 1) {
    shortcut.push_back(conv(name + ".proj", out_c, 1, 1, stride, stride));
    shortcut.push_back(simple(LayerKind::kBatchNorm, name + ".proj.bn"));
  }
  block.branches = {std::move(main), std::move(shortcut)};
  return block;
}

}  // namespace

ArchitectureSpec build_resnet50_audio(int num_labels) {
  ArchitectureSpec spec;
  spec.name = "resnet50-audio";
  spec.num_labels = num_labels;
  auto& L = spec.layers;
  add_cbr(L, "conv1", 64, 7, 7, 1, 1);  // image version's stride 2 removed
  L.push_back(pool(LayerKind::kMaxPool, "pool1", 3, 3, 2, 2, Padding::kSame));
  const int stage_blocks[4] = {3, 4, 6, 3};
  int in_c = 64;
  for (int s = 0; s < 4; ++s) {
    const int mid_c = 64 << s;
    const int out_c = mid_c * 4;
    for (int b = 0; b < stage_blocks[s]; ++b) {
      const std::string name = "res" + std::to_string(s + 2) +
                               std::string(1, static_cast<char>('a' + b));
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      L.push_back(resnet_block(name, in_c, mid_c, out_c, stride));
      L.push_back(simple(LayerKind::kRelu, name + ".relu"));
      in_c = out_c;
    }
  }
  L.push_back(pool(LayerKind::kAvgPool, "avgpool", 6, 4, 1, 1, Padding::kValid));
  L.push_back(simple(LayerKind::kFlatten, "flatten"));
  L.push_back(dense("logits", num_labels));
  L.push_back(simple(LayerKind::kSigmoid, "output"));
  return spec;
}

namespace {

LayerSpec inception_block(const std::string& name,
                          std::vector<std::vector<LayerSpec>> branches) {
  LayerSpec block;
  block.kind = LayerKind::kInception;
  block.name = name;
  block.branches = std::move(branches);
  return block;
}

LayerSpec inception_a(const std::string& n, int pool_proj) {
  std::vector<LayerSpec> b0 = cbr(n + ".b0.1x1", 64, 1, 1);
  std::vector<LayerSpec> b1 = cbr(n + ".b1.1x1", 48, 1, 1);
  append(b1, cbr(n + ".b1.5x5", 64, 5, 5));
  std::vector<LayerSpec> b2 = cbr(n + ".b2.1x1", 64, 1, 1);
  append(b2, cbr(n + ".b2.3x3a", 96, 3, 3));
  append(b2, cbr(n + ".b2.3x3b", 96, 3, 3));
  std::vector<LayerSpec> b3 = {
      pool(LayerKind::kAvgPool, n + ".b3.pool", 3, 3, 1, 1, Padding::kSame)};
  append(b3, cbr(n + ".b3.1x1", pool_proj, 1, 1));
  return inception_block(n, {b0, b1, b2, b3});
}

LayerSpec reduction_a(const std::string& n) {
  std::vector<LayerSpec> b0 = cbr(n + ".b0.3x3", 384, 3, 3, 2, 2, Padding::kValid);
  std::vector<LayerSpec> b1 = cbr(n + ".b1.1x1", 64, 1, 1);
  append(b1, cbr(n + ".b1.3x3a", 96, 3, 3));
  append(b1, cbr(n + ".b1.3x3b", 96, 3, 3, 2, 2, Padding::kValid));
  std::vector<LayerSpec> b2 = {
      pool(LayerKind::kMaxPool, n + ".b2.pool", 3, 3, 2, 2, Padding::kValid)};
  return inception_block(n, {b0, b1, b2});
}

LayerSpec inception_b(const std::string& n, int c7) {
  std::vector<LayerSpec> b0 = cbr(n + ".b0.1x1", 192, 1, 1);
  std::vector<LayerSpec> b1 = cbr(n + ".b1.1x1", c7, 1, 1);
  append(b1, cbr(n + ".b1.1x7", c7, 1, 7));
  append(b1, cbr(n + ".b1.7x1", 192, 7, 1));
  std::vector<LayerSpec> b2 = cbr(n + ".b2.1x1", c7, 1, 1);
  append(b2, cbr(n + ".b2.7x1a", c7, 7, 1));
  append(b2, cbr(n + ".b2.1x7a", c7, 1, 7));
  append(b2, cbr(n + ".b2.7x1b", c7, 7, 1));
  append(b2, cbr(n + ".b2.1x7b", 192, 1, 7));
  std::vector<LayerSpec> b3 = {
      pool(LayerKind::kAvgPool, n + ".b3.pool", 3, 3, 1, 1, Padding::kSame)};
  append(b3, cbr(n + ".b3.1x1", 192, 1, 1));
  return inception_block(n, {b0, b1, b2, b3});
}

LayerSpec reduction_b(const std::string& n) {
  std::vector<LayerSpec> b0 = cbr(n + ".b0.1x1", 192, 1, 1);
  append(b0, cbr(n + ".b0.3x3", 320, 3, 3, 2, 2, Padding::kValid));
  std::vector<LayerSpec> b1 = cbr(n + ".b1.1x1", 192, 1, 1);
  append(b1, cbr(n + ".b1.1x7", 192, 1, 7));
  append(b1, cbr(n + ".b1.7x1", 192, 7, 1));
  append(b1, cbr(n + ".b1.3x3", 192, 3, 3, 2, 2, Padding::kValid));
  std::vector<LayerSpec> b2 = {
      pool(LayerKind::kMaxPool, n + ".b2.pool", 3, 3, 2, 2, Padding::kValid)};
  return inception_block(n, {b0, b1, b2});
}

LayerSpec inception_c(const std::string& n) {
  std::vector<LayerSpec> b0 = cbr(n + ".b0.1x1", 320, 1, 1);
  std::vector<LayerSpec> b1 = cbr(n + ".b1.1x1", 384, 1, 1);
  b1.push_back(inception_block(
      n + ".b1.split",
      {cbr(n + ".b1.1x3", 384, 1, 3), cbr(n + ".b1.3x1", 384, 3, 1)}));
  std::vector<LayerSpec> b2 = cbr(n + ".b2.1x1", 448, 1, 1);
  append(b2, cbr(n + ".b2.3x3", 384, 3, 3));
  b2.push_back(inception_block(
      n + ".b2.split",
      {cbr(n + ".b2.1x3", 384, 1, 3), cbr(n + ".b2.3x1", 384, 3, 1)}));
  std::vector<LayerSpec> b3 = {
      pool(LayerKind::kAvgPool, n + ".b3.pool", 3, 3, 1, 1, Padding::kSame)};
  append(b3, cbr(n + ".b3.1x1", 192, 1, 1));
  return inception_block(n, {b0, b1, b2, b3});
}

}  // namespace

ArchitectureSpec build_inception_v3_audio(int num_labels) {
  ArchitectureSpec spec;
  spec.name = "inception-v3-audio";
  spec.num_labels = num_labels;
  auto& L = spec.layers;
  add_cbr(L, "stem.conv80", 80, 3, 3, 1, 1, Padding::kValid);
  add_cbr(L, "stem.conv192", 192, 3, 3, 2, 2, Padding::kValid);
  L.push_back(inception_a("mixed5b", 32));
  L.push_back(inception_a("mixed5c", 64));
  L.push_back(inception_a("mixed5d", 64));
  L.push_back(reduction_a("mixed6a"));
  L.push_back(inception_b("mixed6b", 128));
  L.push_back(inception_b("mixed6c", 160));
  L.push_back(inception_b("mixed6d", 160));
  L.push_back(inception_b("mixed6e", 192));
  L.push_back(reduction_b("mixed7a"));
  L.push_back(inception_c("mixed7b"));
  L.push_back(inception_c("mixed7c"));
  L.push_back(pool(LayerKind::kAvgPool, "avgpool", 10, 6, 1, 1, Padding::kValid));
  L.push_back(simple(LayerKind::kFlatten, "flatten"));
  L.push_back(dense("logits", num_labels));
  L.push_back(simple(LayerKind::kSigmoid, "output"));
  return spec;
}

ArchitectureSpec with_bottleneck(const ArchitectureSpec& spec, int units) {
  if (spec.layers.size() < 2 ||
      spec.layers.back().kind != LayerKind::kSigmoid ||
      spec.layers[spec.layers.size() - 2].kind != LayerKind::kDense)
    throw Error(ErrorKind::kConfig, "no output head");
  ArchitectureSpec out = spec;
  out.bottleneck_units = units;
  out.name = spec.name + "-bneck" + std::to_string(units);
  const size_t insert_at = out.layers.size() - 2;
  std::vector<LayerSpec> tail(out.layers.begin() + insert_at, out.layers.end());
  out.layers.resize(insert_at);
  out.layers.push_back(dense("bottleneck", units));
  out.layers.push_back(simple(LayerKind::kRelu, "bottleneck.relu"));
  for (auto& l : tail) out.layers.push_back(std::move(l));
  return out;
}

namespace {

int scaled(int units, double f) {
  return std::max(1, static_cast<int>(std::ceil(units * f)));
}

void shrink_chain(std::vector<LayerSpec>& layers, double f,
                  const LayerSpec* output_head) {
  for (LayerSpec& l : layers) {
    for (auto& branch : l.branches) shrink_chain(branch, f, output_head);
    if (&l == output_head) continue;
    if (l.kind == LayerKind::kConv || l.kind == LayerKind::kDense)
      l.units = scaled(l.units, f);
  }
}

}  // namespace

ArchitectureSpec shrink(const ArchitectureSpec& spec, double width_factor) {
  if (width_factor <= 0.0 || width_factor > 1.0)
    throw_config("width factor must be in (0, 1]");
  ArchitectureSpec out = spec;
  if (width_factor == 1.0) return out;
  // The output head keeps num_labels units.
  const LayerSpec* head = &out.layers[out.layers.size() - 2];
  shrink_chain(out.layers, width_factor, head);
  std::ostringstream tag;
  tag << spec.name << "-w" << width_factor;
  out.name = tag.str();
  return out;
}

ArchitectureSpec build_architecture(const std::string& name, int num_labels,
                                    double width_factor, bool bottleneck) {
  ArchitectureSpec spec;
  if (name == "fc")
    spec = build_fully_connected(3, 1000, num_labels);
  else if (name == "alexnet")
    spec = build_alexnet_audio(num_labels);
  else if (name == "vgg")
    spec = build_vgg_audio(num_labels);
  else if (name == "inception")
    spec = build_inception_v3_audio(num_labels);
  else if (name == "resnet")
    spec = build_resnet50_audio(num_labels);
  else
    throw_config("unknown architecture: " + name);
  if (width_factor != 1.0) spec = shrink(spec, width_factor);
  if (bottleneck) spec = with_bottleneck(spec);
  return spec;
}

// --- serialization ----------------------------------------------------------

namespace {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kResidual: return "residual-block";
    case LayerKind::kInception: return "inception-block";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::kConv;
  if (s == "maxpool") return LayerKind::kMaxPool;
  if (s == "avgpool") return LayerKind::kAvgPool;
  if (s == "dense") return LayerKind::kDense;
  if (s == "relu") return LayerKind::kRelu;
  if (s == "sigmoid") return LayerKind::kSigmoid;
  if (s == "batchnorm") return LayerKind::kBatchNorm;
  if (s == "flatten") return LayerKind::kFlatten;
  if (s == "residual-block") return LayerKind::kResidual;
  if (s == "inception-block") return LayerKind::kInception;
  throw_config("unknown layer kind: " + s);
}

json layer_to_json(const LayerSpec& l) {
  json j;
  j["kind"] = kind_name(l.kind);
  j["name"] = l.name;
  const bool windowed = l.kind == LayerKind::kConv ||
                        l.kind == LayerKind::kMaxPool ||
                        l.kind == LayerKind::kAvgPool;
  if (windowed) {
    j["kernel"] = {l.kh, l.kw};
    j["stride"] = {l.sh, l.sw};
    j["padding"] = l.padding == Padding::kSame ? "same" : "valid";
  }
  if (l.kind == LayerKind::kConv || l.kind == LayerKind::kDense) {
    j["units"] = l.units;
    j["use_bias"] = l.use_bias;
  }
  if (!l.branches.empty()) {
    json branches = json::array();
    for (const auto& b : l.branches) {
      json arr = json::array();
      for (const auto& sub : b) arr.push_back(layer_to_json(sub));
      branches.push_back(arr);
    }
    j["branches"] = branches;
  }
  return j;
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  l.kind = kind_from_name(j.at("kind").get<std::string>());
  l.name = j.at("name").get<std::string>();
  if (j.contains("kernel")) {
    l.kh = j["kernel"][0].get<int>();
    l.kw = j["kernel"][1].get<int>();
    l.sh = j["stride"][0].get<int>();
    l.sw = j["stride"][1].get<int>();
    l.padding = j["padding"].get<std::string>() == "same" ? Padding::kSame
                                                          : Padding::kValid;
  }
  if (j.contains("units")) l.units = j["units"].get<int>();
  if (j.contains("use_bias")) l.use_bias = j["use_bias"].get<bool>();
  if (j.contains("branches")) {
    for (const auto& b : j["branches"]) {
      std::vector<LayerSpec> branch;
      for (const auto& sub : b) branch.push_back(layer_from_json(sub));
      l.branches.push_back(std::move(branch));
    }
  }
  return l;
}

}  // namespace

std::string spec_to_json(const ArchitectureSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["input_shape"] = {spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  j["num_labels"] = spec.num_labels;
  j["bottleneck_units"] = spec.bottleneck_units;
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) layers.push_back(layer_to_json(l));
  j["layers"] = layers;
  return j.dump(2);
}

ArchitectureSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_config(std::string("bad architecture json: ") + e.what());
  }
  ArchitectureSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.input_shape = {j.at("input_shape")[0].get<int>(),
                      j.at("input_shape")[1].get<int>(),
                      j.at("input_shape")[2].get<int>()};
  spec.num_labels = j.at("num_labels").get<int>();
  spec.bottleneck_units = j.value("bottleneck_units", 0);
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
  return spec;
}

uint64_t spec_digest(const ArchitectureSpec& spec) {
  return fnv1a64(spec_to_json(spec));
}

}  // namespace wvc
