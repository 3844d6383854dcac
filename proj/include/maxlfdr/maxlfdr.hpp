#pragma once

#include "maxlfdr/asymptotics.hpp"
#include "maxlfdr/errors.hpp"
#include "maxlfdr/io.hpp"
#include "maxlfdr/metrics.hpp"
#include "maxlfdr/models.hpp"
#include "maxlfdr/procedures.hpp"
#include "maxlfdr/sample.hpp"
#include "maxlfdr/simulation.hpp"
#include "maxlfdr/special.hpp"
