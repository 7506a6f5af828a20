#pragma once

#include "spcp/config.hpp"
#include "spcp/thread_pool.hpp"
#include "spcp/sptensor.hpp"
#include "spcp/tns_io.hpp"
#include "spcp/ktensor.hpp"
#include "spcp/blocking.hpp"
#include "spcp/tiny_vec.hpp"
#include "spcp/mttkrp.hpp"
#include "spcp/cp_als.hpp"
#include "spcp/bench.hpp"
