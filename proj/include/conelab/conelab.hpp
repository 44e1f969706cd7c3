#pragma once

#include "conelab/config.hpp"
#include "conelab/elliptic.hpp"
#include "conelab/experiments.hpp"
#include "conelab/field_io.hpp"
#include "conelab/geometry.hpp"
#include "conelab/ma_flow.hpp"
#include "conelab/norms.hpp"
#include "conelab/parabolic.hpp"
#include "conelab/schauder_lab.hpp"
