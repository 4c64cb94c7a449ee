#ifndef MWGRAD_MWGRAD_HPP
#define MWGRAD_MWGRAD_HPP

#include "mwgrad/core.hpp"
#include "mwgrad/diagnostics.hpp"
#include "mwgrad/dynamics.hpp"
#include "mwgrad/estimators.hpp"
#include "mwgrad/kernels.hpp"
#include "mwgrad/objectives.hpp"
#include "mwgrad/run_config.hpp"
#include "mwgrad/weights.hpp"

#endif
