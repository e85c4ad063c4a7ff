#pragma once

#include "faultloc/error.hpp"
#include "faultloc/phasor.hpp"
#include "faultloc/feeder.hpp"
#include "faultloc/fault_type.hpp"
#include "faultloc/oracle.hpp"
#include "faultloc/locators.hpp"
#include "faultloc/parallel.hpp"
#include "faultloc/scenario.hpp"
#include "faultloc/bench.hpp"
#include "faultloc/record_io.hpp"
