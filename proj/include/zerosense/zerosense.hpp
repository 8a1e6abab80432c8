// zerosense.hpp
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

#include "zerosense/config.hpp"
#include "zerosense/core.hpp"
#include "zerosense/corpus_io.hpp"
#include "zerosense/harness/client.hpp"
#include "zerosense/harness/decouple.hpp"
#include "zerosense/harness/eval.hpp"
#include "zerosense/harness/pipeline.hpp"
#include "zerosense/harness/report.hpp"
#include "zerosense/layout/font_metrics.hpp"
#include "zerosense/layout/font_solver.hpp"
#include "zerosense/layout/reconstruct.hpp"
#include "zerosense/metrics/decoupling.hpp"
#include "zerosense/metrics/string_metrics.hpp"
#include "zerosense/perturb/perturb.hpp"
#include "zerosense/render/image_ops.hpp"
#include "zerosense/render/render.hpp"
#include "zerosense/render/theta.hpp"
#include "zerosense/render/typeset.hpp"
#include "zerosense/rng.hpp"
#include "zerosense/unicode.hpp"
#include "zerosense/zerotext/generate.hpp"
#include "zerosense/zerotext/ngram.hpp"
#include "zerosense/zerotext/oracle.hpp"
#include "zerosense/zerotext/remote_oracle.hpp"
