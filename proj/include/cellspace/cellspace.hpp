#pragma once

// Umbrella header.

#include "architecture_export.hpp"
#include "evaluation.hpp"
#include "external_evaluator.hpp"
#include "genome_codec.hpp"
#include "graph_builder.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "optimizer.hpp"
#include "pareto_io.hpp"
#include "rng.hpp"
#include "space_config.hpp"
