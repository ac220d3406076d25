#pragma once

#include "oscil/baselines.hpp"
#include "oscil/bench.hpp"
#include "oscil/error.hpp"
#include "oscil/hbvm.hpp"
#include "oscil/linalg.hpp"
#include "oscil/polybasis.hpp"
#include "oscil/problems.hpp"
#include "oscil/truncation.hpp"
