#pragma once

#include "popbal/ad.hpp"
#include "popbal/benchmark.hpp"
#include "popbal/config.hpp"
#include "popbal/core.hpp"
#include "popbal/error.hpp"
#include "popbal/estimation.hpp"
#include "popbal/fvm.hpp"
#include "popbal/io.hpp"
#include "popbal/kinetics.hpp"
#include "popbal/moments.hpp"
#include "popbal/verification.hpp"
