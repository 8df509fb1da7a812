// Copyright (c) 2026 The jsaspg Authors
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

#ifndef JSASPG_JSASPG_HPP_
#define JSASPG_JSASPG_HPP_

#include "jsaspg/common.hpp"
#include "jsaspg/seq.hpp"
#include "jsaspg/ctc.hpp"
#include "jsaspg/ngram_lm.hpp"
#include "jsaspg/beam_search.hpp"
#include "jsaspg/model.hpp"
#include "jsaspg/optimizer.hpp"
#include "jsaspg/dataset.hpp"
#include "jsaspg/system.hpp"
#include "jsaspg/jsa.hpp"
#include "jsaspg/decoder.hpp"
#include "jsaspg/trainer.hpp"
#include "jsaspg/synth.hpp"
#include "jsaspg/experiment.hpp"

#endif  // JSASPG_JSASPG_HPP_
