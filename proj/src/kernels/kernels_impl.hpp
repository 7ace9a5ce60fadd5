#pragma once

#include <cmath>

#include "qrot/kernels.hpp"

namespace qrot::kernels {

extern const KernelTable kScalarKernels;
#if defined(QROT_HAVE_AVX2)
extern const KernelTable kAvx2Kernels;
#endif

}  // namespace qrot::kernels
