#include <catch2/catch_amalgamated.hpp>

#include "geodecomp/geodecomp.hpp"
