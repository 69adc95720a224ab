#pragma once

// The precision is part of the ABI: everything lives in an inline namespace
// named after it, so the float and double builds can be linked into the
// same binary without clashing.
#ifdef ICACLF_REAL_F64
#define ICACLF_ABI f64
#else
#define ICACLF_ABI f32
#endif
