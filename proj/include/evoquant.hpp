// Copyright 2026 The evoquant Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "evoquant/binary_io.hpp"
#include "evoquant/config.hpp"
#include "evoquant/dataset.hpp"
#include "evoquant/error.hpp"
#include "evoquant/evaluator.hpp"
#include "evoquant/evolution.hpp"
#include "evoquant/huffman.hpp"
#include "evoquant/network.hpp"
#include "evoquant/objective.hpp"
#include "evoquant/quantized_model.hpp"
#include "evoquant/quantizer.hpp"
#include "evoquant/random.hpp"
#include "evoquant/search_space.hpp"
#include "evoquant/tensor_model.hpp"
