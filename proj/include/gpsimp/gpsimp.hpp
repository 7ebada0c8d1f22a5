#pragma once

#include "gpsimp/cloud.hpp"
#include "gpsimp/cloud_io.hpp"
#include "gpsimp/error.hpp"
#include "gpsimp/eval.hpp"
#include "gpsimp/geometry.hpp"
#include "gpsimp/gp.hpp"
#include "gpsimp/hyperopt.hpp"
#include "gpsimp/kernel.hpp"
#include "gpsimp/laplacian.hpp"
#include "gpsimp/parallel.hpp"
#include "gpsimp/simplify.hpp"
#include "gpsimp/spatial.hpp"
#include "gpsimp/synthetic.hpp"
