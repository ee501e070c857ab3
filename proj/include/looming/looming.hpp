#pragma once

#include "looming/errors.hpp"
#include "looming/geometry.hpp"
#include "looming/io.hpp"
#include "looming/looming_map.hpp"
#include "looming/range_image.hpp"
#include "looming/run_config.hpp"
#include "looming/synth.hpp"
