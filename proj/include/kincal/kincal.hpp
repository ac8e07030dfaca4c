// Copyright 2026 The kincal Authors
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

#ifndef KINCAL_KINCAL_HPP
#define KINCAL_KINCAL_HPP

#include "kincal/acquisition.hpp"
#include "kincal/arm_model.hpp"
#include "kincal/common.hpp"
#include "kincal/config.hpp"
#include "kincal/gp.hpp"
#include "kincal/harness.hpp"
#include "kincal/io_util.hpp"
#include "kincal/kinematics.hpp"
#include "kincal/linearized.hpp"
#include "kincal/pool.hpp"
#include "kincal/residual_model.hpp"
#include "kincal/rng.hpp"
#include "kincal/robots.hpp"
#include "kincal/run_record.hpp"
#include "kincal/stats.hpp"

#endif  // KINCAL_KINCAL_HPP
