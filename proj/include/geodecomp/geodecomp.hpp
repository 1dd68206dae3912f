#pragma once

#include "geodecomp/composition.hpp"
#include "geodecomp/dataio.hpp"
#include "geodecomp/decompose.hpp"
#include "geodecomp/errors.hpp"
#include "geodecomp/eval.hpp"
#include "geodecomp/geometry.hpp"
#include "geodecomp/karcher.hpp"
#include "geodecomp/noise.hpp"
#include "geodecomp/synthlab.hpp"
#include "geodecomp/tuning.hpp"
