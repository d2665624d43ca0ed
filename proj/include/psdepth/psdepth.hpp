#pragma once

// Convenience header pulling in the whole numerical library. File formats and
// the command-line front end live in io.hpp and cli.hpp.

#include "psdepth/types.hpp"
#include "psdepth/gradient_operator.hpp"
#include "psdepth/core.hpp"
#include "psdepth/classic.hpp"
#include "psdepth/energy.hpp"
#include "psdepth/dense_oracle.hpp"
#include "psdepth/gradcheck.hpp"
#include "psdepth/ipiano.hpp"
#include "psdepth/bounds.hpp"
#include "psdepth/synthetic.hpp"
