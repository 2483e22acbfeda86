#pragma once
// Convenience umbrella: the full library.

#include "mtd/acc.hpp"
#include "mtd/core.hpp"
#include "mtd/eval.hpp"
#include "mtd/fft.hpp"
#include "mtd/forward.hpp"
#include "mtd/hetero.hpp"
#include "mtd/homo.hpp"
#include "mtd/kahan.hpp"
#include "mtd/nls.hpp"
#include "mtd/parallel.hpp"
#include "mtd/phase2d.hpp"
#include "mtd/rng.hpp"
#include "mtd/synth.hpp"
#include "mtd/trust_region.hpp"
