#pragma once

#include "alignment.hpp"
#include "core_model.hpp"
#include "formats.hpp"
#include "log.hpp"
#include "phylo.hpp"
#include "readset_distance.hpp"
#include "rng.hpp"
#include "simulator.hpp"
