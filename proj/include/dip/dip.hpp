#pragma once

// Umbrella header: pulls in the whole library.

#include "dip/backend.hpp"
#include "dip/bench.hpp"
#include "dip/cache.hpp"
#include "dip/chat.hpp"
#include "dip/config.hpp"
#include "dip/digest.hpp"
#include "dip/fsutil.hpp"
#include "dip/gateway.hpp"
#include "dip/http_backend.hpp"
#include "dip/manifest.hpp"
#include "dip/pipeline.hpp"
#include "dip/result.hpp"
#include "dip/runner.hpp"
#include "dip/tagparse.hpp"
#include "dip/task.hpp"
#include "dip/templates.hpp"
