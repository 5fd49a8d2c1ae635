#pragma once

#include "magsq/error.hpp"
#include "magsq/fock.hpp"
#include "magsq/model.hpp"
#include "magsq/analysis.hpp"
#include "magsq/parallel.hpp"
#include "magsq/dynamics.hpp"
#include "magsq/tomography.hpp"
#include "magsq/io.hpp"
#include "magsq/jobs.hpp"
