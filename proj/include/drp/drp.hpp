#pragma once

// Umbrella header for the toolkit.

#include "drp/autodiff.hpp"
#include "drp/checkpoint.hpp"
#include "drp/experiment.hpp"
#include "drp/fbp.hpp"
#include "drp/io.hpp"
#include "drp/iterative.hpp"
#include "drp/metrics.hpp"
#include "drp/network.hpp"
#include "drp/phantom.hpp"
#include "drp/projector.hpp"
#include "drp/radon_ops.hpp"
#include "drp/reconstruct.hpp"
#include "drp/types.hpp"
