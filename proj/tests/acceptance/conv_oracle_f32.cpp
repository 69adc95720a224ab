#define CONV_ORACLE_FN conv_oracle_f32
#include "conv_oracle.inc"
