#include "usfgan/kernels.hpp"

#define USFGAN_KERNELS_NAMESPACE omp
#define USFGAN_PAR_FOR _Pragma("omp parallel for schedule(static)")
#define USFGAN_PAR_FOR_COLLAPSE2 \
  _Pragma("omp parallel for collapse(2) schedule(static)")
#include "kernels_body.inc"
