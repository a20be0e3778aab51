#pragma once

#include "biphoton/errors.hpp"
#include "biphoton/fitting.hpp"
#include "biphoton/hom.hpp"
#include "biphoton/mzi.hpp"
#include "biphoton/quadrature.hpp"
#include "biphoton/spectra.hpp"
#include "biphoton/units.hpp"
