#pragma once

#include "scgm/core.hpp"
#include "scgm/tables.hpp"
#include "scgm/hmm_params.hpp"
#include "scgm/statements.hpp"
#include "scgm/cs_constraints.hpp"
#include "scgm/chain_graph.hpp"
#include "scgm/regression.hpp"
#include "scgm/fitting.hpp"
#include "scgm/search.hpp"
#include "scgm/oracle.hpp"
