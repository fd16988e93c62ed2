#pragma once

#include "marginal_evo/config.hpp"
#include "marginal_evo/diagnostics.hpp"
#include "marginal_evo/dynamics.hpp"
#include "marginal_evo/ensembles.hpp"
#include "marginal_evo/errors.hpp"
#include "marginal_evo/evolution.hpp"
#include "marginal_evo/io.hpp"
#include "marginal_evo/parallel.hpp"
#include "marginal_evo/quadrature.hpp"
#include "marginal_evo/seed.hpp"
#include "marginal_evo/spectra.hpp"
