#pragma once

#include "cmemh/band_lu.hpp"
#include "cmemh/ensemble.hpp"
#include "cmemh/errors.hpp"
#include "cmemh/generator.hpp"
#include "cmemh/krylov.hpp"
#include "cmemh/matexp.hpp"
#include "cmemh/pade.hpp"
#include "cmemh/rational.hpp"
#include "cmemh/reaction_system.hpp"
#include "cmemh/report.hpp"
#include "cmemh/rng.hpp"
#include "cmemh/sampler.hpp"
#include "cmemh/simulators.hpp"
#include "cmemh/system_file.hpp"
