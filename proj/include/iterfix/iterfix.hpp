#pragma once

#include "iterfix/analytics.hpp"
#include "iterfix/backend.hpp"
#include "iterfix/benchmark.hpp"
#include "iterfix/error.hpp"
#include "iterfix/patch.hpp"
#include "iterfix/plan.hpp"
#include "iterfix/process.hpp"
#include "iterfix/prompt.hpp"
#include "iterfix/records.hpp"
#include "iterfix/remote_backend.hpp"
#include "iterfix/report.hpp"
#include "iterfix/scheduler.hpp"
#include "iterfix/validator.hpp"
