/*
   Copyright 2026 The milstein-mdp Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include "mmdp/accumulate.hpp"
#include "mmdp/diagnostics.hpp"
#include "mmdp/error.hpp"
#include "mmdp/estimator.hpp"
#include "mmdp/io.hpp"
#include "mmdp/model.hpp"
#include "mmdp/montecarlo.hpp"
#include "mmdp/noise.hpp"
#include "mmdp/parallel.hpp"
#include "mmdp/quadrature.hpp"
#include "mmdp/scheme.hpp"
#include "mmdp/stats.hpp"
