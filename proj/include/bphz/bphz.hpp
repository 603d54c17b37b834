#pragma once

#include "graph.hpp"
#include "configuration.hpp"
#include "power.hpp"
#include "forest.hpp"
#include "jet.hpp"
#include "bessel.hpp"
#include "kernel.hpp"
#include "taylor.hpp"
#include "integrate.hpp"
#include "renorm.hpp"
#include "verify.hpp"
