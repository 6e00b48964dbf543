#pragma once

#include "errors.hpp"
#include "fourier.hpp"
#include "refgeom.hpp"
#include "curvature.hpp"
#include "gmres.hpp"
#include "potential.hpp"
#include "msflow.hpp"
#include "linstab.hpp"
#include "config.hpp"
#include "io.hpp"
