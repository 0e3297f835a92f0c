#pragma once

#include "levels/bridge.hpp"
#include "levels/common.hpp"
#include "levels/dynamics.hpp"
#include "levels/generators.hpp"
#include "levels/io.hpp"
#include "levels/partition.hpp"
#include "levels/regularity.hpp"
