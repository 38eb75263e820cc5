// Copyright 2026 The Proteus Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "proteus/linalg.hpp"

namespace proteus {

/// One labeled input. Labels are global class ids (class-incremental setting).
struct LabeledSample {
  Vector x;
  int label = 0;
};

}  // namespace proteus
