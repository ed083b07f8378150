// Copyright (c) 2026 The cbias Authors
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

#include "cbias/decoder.h"
#include "cbias/edit_distance.h"
#include "cbias/error.h"
#include "cbias/eval.h"
#include "cbias/external_scorer.h"
#include "cbias/lexicon.h"
#include "cbias/prefix_tree.h"
#include "cbias/scorer.h"
#include "cbias/text.h"
#include "cbias/vocabulary.h"
