#pragma once

#include "popbal/ad/drivers.hpp"
#include "popbal/ad/dual.hpp"
#include "popbal/ad/scalar.hpp"
#include "popbal/ad/summation.hpp"
#include "popbal/ad/tape.hpp"
