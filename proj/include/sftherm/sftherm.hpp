/**
 * @file sftherm.hpp
 * @brief Umbrella header for the numerical modules (no JSON/CLI dependencies).
 */
#pragma once

#include "sftherm/error.hpp"
#include "sftherm/leafwise.hpp"
#include "sftherm/marcus.hpp"
#include "sftherm/parallel.hpp"
#include "sftherm/potential.hpp"
#include "sftherm/sft_core.hpp"
#include "sftherm/suspension.hpp"
#include "sftherm/transfer.hpp"
