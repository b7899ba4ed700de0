// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdiqa/aggregate.hpp"
#include "mdiqa/backbone.hpp"
#include "mdiqa/checkpoint.hpp"
#include "mdiqa/config.hpp"
#include "mdiqa/data.hpp"
#include "mdiqa/heads.hpp"
#include "mdiqa/image.hpp"
#include "mdiqa/image_io.hpp"
#include "mdiqa/losses.hpp"
#include "mdiqa/metrics.hpp"
#include "mdiqa/nn.hpp"
#include "mdiqa/ops.hpp"
#include "mdiqa/optim.hpp"
#include "mdiqa/registry.hpp"
#include "mdiqa/restore.hpp"
#include "mdiqa/rng.hpp"
#include "mdiqa/tensor.hpp"
#include "mdiqa/train.hpp"
