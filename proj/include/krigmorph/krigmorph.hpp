#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "fixed_geometry.hpp"
#include "kernel.hpp"
#include "spd.hpp"
#include "selection.hpp"
#include "param.hpp"
#include "mprm.hpp"
#include "mesh.hpp"
#include "mesh_io.hpp"
#include "csv.hpp"
