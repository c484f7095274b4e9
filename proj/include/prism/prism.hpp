#pragma once

#include "prism/bound.hpp"
#include "prism/error.hpp"
#include "prism/geometry.hpp"
#include "prism/headterm.hpp"
#include "prism/lipschitz.hpp"
#include "prism/matio.hpp"
#include "prism/oracle.hpp"
#include "prism/regularizer.hpp"
#include "prism/report.hpp"
#include "prism/rng.hpp"
#include "prism/types.hpp"
