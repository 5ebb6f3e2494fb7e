#pragma once

#include "hamos/bench.hpp"
#include "hamos/energy.hpp"
#include "hamos/error.hpp"
#include "hamos/id_store.hpp"
#include "hamos/io.hpp"
#include "hamos/metrics.hpp"
#include "hamos/objectives.hpp"
#include "hamos/samplers.hpp"
#include "hamos/sphere.hpp"
#include "hamos/store_io.hpp"
#include "hamos/synthesis.hpp"
