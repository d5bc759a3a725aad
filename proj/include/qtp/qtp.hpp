#pragma once

#include "qtp/error.hpp"
#include "qtp/rng.hpp"
#include "qtp/topology.hpp"
#include "qtp/routing.hpp"
#include "qtp/memory.hpp"
#include "qtp/window.hpp"
#include "qtp/tele.hpp"
#include "qtp/tag.hpp"
#include "qtp/engine.hpp"
#include "qtp/metrics.hpp"
#include "qtp/config.hpp"
#include "qtp/emit.hpp"
#include "qtp/presets.hpp"
