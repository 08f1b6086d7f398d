// Copyright 2026 The MDER Authors.
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

#include "mder/augment.hpp"
#include "mder/checkpoint.hpp"
#include "mder/corpus.hpp"
#include "mder/crf.hpp"
#include "mder/error.hpp"
#include "mder/metrics.hpp"
#include "mder/mining.hpp"
#include "mder/model/config.hpp"
#include "mder/model/layers.hpp"
#include "mder/model/network.hpp"
#include "mder/model/params.hpp"
#include "mder/model/vocab.hpp"
#include "mder/optim.hpp"
#include "mder/rules.hpp"
#include "mder/synthetic.hpp"
#include "mder/tagscheme.hpp"
#include "mder/train.hpp"
#include "mder/utf8.hpp"
