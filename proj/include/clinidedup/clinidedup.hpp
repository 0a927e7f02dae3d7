// Copyright 2026 The clinidedup Authors.
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

#ifndef CLINIDEDUP_CLINIDEDUP_HPP_
#define CLINIDEDUP_CLINIDEDUP_HPP_

#include "clinidedup/corpus.hpp"
#include "clinidedup/duplicates.hpp"
#include "clinidedup/emit.hpp"
#include "clinidedup/error.hpp"
#include "clinidedup/exact_substr.hpp"
#include "clinidedup/hash.hpp"
#include "clinidedup/parallel.hpp"
#include "clinidedup/pipeline.hpp"
#include "clinidedup/preprocess.hpp"
#include "clinidedup/redundancy.hpp"
#include "clinidedup/relevance.hpp"
#include "clinidedup/suffix_array.hpp"
#include "clinidedup/synthetic.hpp"

#endif  // CLINIDEDUP_CLINIDEDUP_HPP_
