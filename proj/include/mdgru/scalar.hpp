// Global scalar type selection: 64-bit by default, 32-bit via MDGRU_FLOAT32.
#pragma once

namespace mdgru {

#ifdef MDGRU_FLOAT32
using real = float;
#else
using real = double;
#endif

}  // namespace mdgru
