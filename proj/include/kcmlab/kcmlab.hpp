#pragma once

#include "kcmlab/barrier.hpp"
#include "kcmlab/bootstrap.hpp"
#include "kcmlab/constraints.hpp"
#include "kcmlab/directions.hpp"
#include "kcmlab/droplets.hpp"
#include "kcmlab/exact.hpp"
#include "kcmlab/family.hpp"
#include "kcmlab/harness.hpp"
#include "kcmlab/io.hpp"
#include "kcmlab/kcm.hpp"
#include "kcmlab/lattice.hpp"
#include "kcmlab/parallel.hpp"
#include "kcmlab/rng.hpp"
#include "kcmlab/version.hpp"
