#pragma once

#include "sheafnet/error.hpp"
#include "sheafnet/point_set.hpp"
#include "sheafnet/matrix.hpp"
#include "sheafnet/topology.hpp"
#include "sheafnet/activation.hpp"
#include "sheafnet/section.hpp"
#include "sheafnet/polynomial.hpp"
#include "sheafnet/linalg.hpp"
#include "sheafnet/cech.hpp"
#include "sheafnet/network.hpp"
#include "sheafnet/builders.hpp"
#include "sheafnet/witnesses.hpp"
#include "sheafnet/graphs.hpp"
#include "sheafnet/io.hpp"
