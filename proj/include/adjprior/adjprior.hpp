#pragma once

#include "adjprior/adjacency.hpp"
#include "adjprior/errors.hpp"
#include "adjprior/gradcheck.hpp"
#include "adjprior/io.hpp"
#include "adjprior/losses.hpp"
#include "adjprior/metrics.hpp"
#include "adjprior/phantom.hpp"
#include "adjprior/postprocess.hpp"
#include "adjprior/rng.hpp"
#include "adjprior/volume.hpp"
