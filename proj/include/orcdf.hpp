#pragma once

#include "orcdf/error.hpp"
#include "orcdf/numerics/rng.hpp"
#include "orcdf/numerics/sparse.hpp"
#include "orcdf/numerics/tensor.hpp"
#include "orcdf/numerics/tape.hpp"
#include "orcdf/numerics/optim.hpp"
#include "orcdf/dataset.hpp"
#include "orcdf/graph.hpp"
#include "orcdf/rgc.hpp"
#include "orcdf/cdm.hpp"
#include "orcdf/metrics.hpp"
#include "orcdf/training.hpp"
#include "orcdf/cat.hpp"
#include "orcdf/io.hpp"
#include "orcdf/checkpoint.hpp"
#include "orcdf/cli.hpp"
