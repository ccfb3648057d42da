#pragma once

#include "asymptotics.hpp"
#include "calibrate.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"
#include "ou.hpp"
#include "parallel.hpp"
#include "pde.hpp"
#include "portfolio.hpp"
#include "random.hpp"
#include "simulate.hpp"
