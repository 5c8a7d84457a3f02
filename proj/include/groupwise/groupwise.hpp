// Copyright 2026 The Groupwise Authors
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

#ifndef GROUPWISE__GROUPWISE_HPP_
#define GROUPWISE__GROUPWISE_HPP_

#include "groupwise/features.hpp"
#include "groupwise/grouping.hpp"
#include "groupwise/ingest.hpp"
#include "groupwise/modeling/logistic.hpp"
#include "groupwise/modeling/metrics.hpp"
#include "groupwise/modeling/models.hpp"
#include "groupwise/modeling/multinomial.hpp"
#include "groupwise/modeling/report.hpp"
#include "groupwise/modeling/selection.hpp"
#include "groupwise/pipeline.hpp"
#include "groupwise/risk.hpp"
#include "groupwise/ssm.hpp"
#include "groupwise/synth.hpp"

#endif  // GROUPWISE__GROUPWISE_HPP_
