#pragma once

#include "rtucker/cp.hpp"
#include "rtucker/harness.hpp"
#include "rtucker/io.hpp"
#include "rtucker/kernels.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/model.hpp"
#include "rtucker/sketch.hpp"
#include "rtucker/synth.hpp"
#include "rtucker/tensor.hpp"
#include "rtucker/tucker.hpp"
