#pragma once

// Umbrella header for the adaptive entropic-witness simulation library.

#include "quadwit/config.hpp"
#include "quadwit/entropy.hpp"
#include "quadwit/grid.hpp"
#include "quadwit/io.hpp"
#include "quadwit/joint_model.hpp"
#include "quadwit/matrix.hpp"
#include "quadwit/measurement.hpp"
#include "quadwit/quadrature.hpp"
#include "quadwit/quadtree.hpp"
#include "quadwit/rng.hpp"
#include "quadwit/runner.hpp"
#include "quadwit/source_model.hpp"
#include "quadwit/uncertainty.hpp"
#include "quadwit/witness.hpp"
