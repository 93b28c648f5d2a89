#include <math.h>

void twoloop(double const *__restrict__ inp, double *__restrict__ out, int const n)
{
  for (int i_0 = 0; i_0 <= -1 + n; ++i_0)
    out[i_0] = 5.0 * (6.0 * inp[i_0]);
}
