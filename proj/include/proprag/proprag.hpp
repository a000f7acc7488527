#pragma once
// Umbrella header: the whole library in one include.

#include "proprag/beam.hpp"
#include "proprag/config.hpp"
#include "proprag/embedding.hpp"
#include "proprag/errors.hpp"
#include "proprag/eval.hpp"
#include "proprag/extraction.hpp"
#include "proprag/graph.hpp"
#include "proprag/indexing.hpp"
#include "proprag/persist.hpp"
#include "proprag/pipeline.hpp"
#include "proprag/ppr.hpp"
#include "proprag/remote.hpp"
#include "proprag/text.hpp"
