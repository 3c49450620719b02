//
// Copyright 2026 The rigid-qbnb Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "rigid_qbnb/assignment.hpp"
#include "rigid_qbnb/bounds.hpp"
#include "rigid_qbnb/correspondence.hpp"
#include "rigid_qbnb/distance_grid.hpp"
#include "rigid_qbnb/error.hpp"
#include "rigid_qbnb/geometry.hpp"
#include "rigid_qbnb/io.hpp"
#include "rigid_qbnb/kd_tree.hpp"
#include "rigid_qbnb/numeric.hpp"
#include "rigid_qbnb/parallel.hpp"
#include "rigid_qbnb/procrustes.hpp"
#include "rigid_qbnb/random.hpp"
#include "rigid_qbnb/search.hpp"
#include "rigid_qbnb/search_engine.hpp"
#include "rigid_qbnb/synth.hpp"
