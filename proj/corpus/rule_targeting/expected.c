#include <math.h>

void fgh(float *__restrict__ a, int const n)
{
  for (int i = 0; i <= -1 + n; ++i)
    a[i] = (1.0f + (12.0f + (float) i * a[i]) + 20.0f * (12.0f + (float) i * a[i])) * (1.0f + (12.0f + (float) i * a[i]) + 20.0f * (12.0f + (float) i * a[i]));
}
