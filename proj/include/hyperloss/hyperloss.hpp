#pragma once

#include "hyperloss/accounting.hpp"
#include "hyperloss/dataio.hpp"
#include "hyperloss/dataset.hpp"
#include "hyperloss/errors.hpp"
#include "hyperloss/optimizer.hpp"
#include "hyperloss/regress.hpp"
#include "hyperloss/scaling.hpp"
#include "hyperloss/shape.hpp"
#include "hyperloss/synth.hpp"
#include "hyperloss/throughput.hpp"
