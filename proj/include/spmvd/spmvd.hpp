#pragma once

#include "spmvd/commands.hpp"
#include "spmvd/config.hpp"
#include "spmvd/error.hpp"
#include "spmvd/estimators.hpp"
#include "spmvd/mvd.hpp"
#include "spmvd/network.hpp"
#include "spmvd/oracle.hpp"
#include "spmvd/rng.hpp"
#include "spmvd/stats.hpp"
#include "spmvd/trainer.hpp"
#include "spmvd/validation.hpp"
