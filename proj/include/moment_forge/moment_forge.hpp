#pragma once

#include "errors.hpp"
#include "tolerances.hpp"
#include "linalg.hpp"
#include "system.hpp"
#include "moments.hpp"
#include "assignment.hpp"
#include "riccati.hpp"
#include "synthesis.hpp"
#include "sim.hpp"
#include "himat.hpp"
