#pragma once

#include "aunets/netcore/adam.hpp"
#include "aunets/netcore/checkpoint.hpp"
#include "aunets/netcore/fusion.hpp"
#include "aunets/netcore/layer_graph.hpp"
#include "aunets/netcore/layers.hpp"
#include "aunets/netcore/profile.hpp"
#include "aunets/netcore/tensor.hpp"
#include "aunets/netcore/transplant.hpp"
