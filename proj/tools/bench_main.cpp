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

// Step-time probe: one training step of each architecture at a given width
// on random patches. Useful when sizing experiment budgets for a machine.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "wavclass/kernels.hpp"
#include "wavclass/loss.hpp"
#include "wavclass/model.hpp"

int main(int argc, char** argv) {
  const double width = argc > 1 ? std::stod(argv[1]) : 0.125;
  const int batch = argc > 2 ? std::stoi(argv[2]) : 128;
  const int labels = 8;
  std::printf("isa=%s width=%g batch=%d\n", wvc::kern::isa_name(), width, batch);

  wvc::Rng data_rng(7);
  std::vector<float> input(static_cast<size_t>(batch) * 96 * 64);
  for (auto& v : input) v = static_cast<float>(data_rng.normal(0.0, 1.0));
  wvc::Tensor<float> targets({batch, labels});
  for (int i = 0; i < batch; ++i)
    targets.values[static_cast<size_t>(i) * labels + i % labels] = 1.0f;

  for (const std::string name : {"fc", "alexnet", "vgg", "inception", "resnet"}) {
    const double w = name == "fc" ? 1.0 : width;
    wvc::ArchitectureSpec spec = wvc::build_architecture(name, labels, w);
    const wvc::CostReport costs = wvc::count_costs(spec);
    wvc::Model model = wvc::build_model(spec, 42);
    wvc::AdamState<float> adam;
    adam.init(model.net.parameters());

    auto step = [&] {
      model.net.set_input(input.data(), batch);
      model.net.forward(wvc::Phase::kTrain);
      wvc::Tensor<float> dscores;
      wvc::multilabel_bce(model.net.output()->out, targets, &dscores);
      model.net.backward(dscores);
      wvc::adam_step(model.net.parameters(), adam);
    };
    step();  // warm-up includes buffer allocation
    const auto t0 = std::chrono::steady_clock::now();
    const int iters = 3;
    for (int i = 0; i < iters; ++i) step();
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count() / iters;
    // forward + backward roughly 3x the forward multiply count
    const double gflops = 3.0 * 2.0 * static_cast<double>(costs.total_multiplies) *
                          batch / s / 1e9;
    std::printf("%-22s %8.0fM mults  %7.3f s/step  ~%6.1f GFLOP/s\n",
                spec.name.c_str(),
                static_cast<double>(costs.total_multiplies) / 1e6, s, gflops);
  }
  return 0;
}
