/* Copyright 2026 The SBNN Authors. All Rights Reserved.

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

#pragma once

#include <span>

#include "sbnn/infer.hpp"
#include "sbnn/model.hpp"
#include "sbnn/nn/network.hpp"

namespace sbnn::nn {

/// Converts a trained network into a quantized model. Each weight layer absorbs
/// an immediately following batchnorm (running statistics) and sign.
///
/// Analytic refits (tau, phi) in closed form, Learned keeps the trained pair
/// and FixedPM1 maps every binarized layer to {-1, +1}. Domains with tau < 0
/// are flipped into canonical form.
model::QuantizedModel quantize_snapshot(Network& net, OmegaMode mode);

/// Float reference path over a quantized model: dense loops over +-1 values,
/// integer pre-activations z' and q, the same affine remap and sign decision
/// as the sparse engine, and the shared real-layer primitives.
infer::Trace reference_forward(const model::QuantizedModel& model, std::span<const double> input);

}  // namespace sbnn::nn
