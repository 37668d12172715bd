#include "usfgan/kernels.hpp"

#define USFGAN_KERNELS_NAMESPACE serial
#define USFGAN_PAR_FOR
#define USFGAN_PAR_FOR_COLLAPSE2
#include "kernels_body.inc"
