#pragma once

#include "hotpool/rational.hpp"
#include "hotpool/rng.hpp"
#include "hotpool/kernel.hpp"
#include "hotpool/cloud.hpp"
#include "hotpool/service.hpp"
#include "hotpool/workload.hpp"
#include "hotpool/config.hpp"
#include "hotpool/harness.hpp"
#include "hotpool/cli.hpp"
