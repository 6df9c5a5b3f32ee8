#pragma once

// Umbrella header.

#include "linalg.hpp"    // IWYU pragma: export
#include "ode.hpp"       // IWYU pragma: export
#include "impulse.hpp"   // IWYU pragma: export
#include "system.hpp"    // IWYU pragma: export
#include "design.hpp"    // IWYU pragma: export
#include "gate.hpp"      // IWYU pragma: export
#include "models.hpp"    // IWYU pragma: export
#include "shooting.hpp"  // IWYU pragma: export
#include "floquet.hpp"   // IWYU pragma: export
#include "simulate.hpp"  // IWYU pragma: export
#include "expr.hpp"      // IWYU pragma: export
#include "config.hpp"    // IWYU pragma: export
#include "acceptance.hpp"  // IWYU pragma: export
