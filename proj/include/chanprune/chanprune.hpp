// Copyright 2026 The Authors.
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

#include "chanprune/combinatorics.hpp"
#include "chanprune/config.hpp"
#include "chanprune/core.hpp"
#include "chanprune/error.hpp"
#include "chanprune/experiment.hpp"
#include "chanprune/graph.hpp"
#include "chanprune/jacobi.hpp"
#include "chanprune/matrix_io.hpp"
#include "chanprune/prune.hpp"
#include "chanprune/sim.hpp"
#include "chanprune/verify.hpp"
