#include <math.h>

void bsq(float *__restrict__ a, float const *__restrict__ b, int const n)
{
  for (int i = 0; i <= -1 + n; ++i)
    a[i] = 23.0f * (b[i] * b[i]) + 25.0f * (b[i] * b[i]);
}
