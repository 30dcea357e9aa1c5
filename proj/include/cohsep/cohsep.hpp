#pragma once

#include "cohsep/numeric.hpp"
#include "cohsep/statistics.hpp"
#include "cohsep/optics.hpp"
#include "cohsep/bases.hpp"
#include "cohsep/sensitivity.hpp"
#include "cohsep/montecarlo.hpp"
#include "cohsep/csv.hpp"
#include "cohsep/svg.hpp"
#include "cohsep/config.hpp"
#include "cohsep/sweep.hpp"
#include "cohsep/certify.hpp"
