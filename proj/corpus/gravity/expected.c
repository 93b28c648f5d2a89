#include <math.h>

void gravity(float const *__restrict__ x, float const *__restrict__ center, float *__restrict__ force, float const *__restrict__ mass, float const massc, int const npart)
{
  float radc;
  float rad_j;

  for (int i = 0; i <= -1 + npart; ++i)
  {
    {
      float acc_0 = 0.0f;
      for (int n = 0; n <= 2; ++n)
        acc_0 = acc_0 + (x[3 * i + n] + -1.0f * center[n]) * (x[3 * i + n] + -1.0f * center[n]);
      radc = sqrtf(acc_0);
    }
    for (int j = 0; j <= -1 + npart; ++j)
    {
      {
        float acc_1 = 0.0f;
        for (int n2 = 0; n2 <= 2; ++n2)
          acc_1 = acc_1 + (x[3 * i + n2] + -1.0f * x[3 * j + n2]) * (x[3 * i + n2] + -1.0f * x[3 * j + n2]);
        rad_j = sqrtf(acc_1);
      }
    }
    {
      float acc_2 = 0.0f;
      for (int j = 0; j <= -1 + npart; ++j)
        acc_2 = acc_2 + -66.742f * mass[i] * mass[j] / (rad_j * rad_j);
      force[i] = -66.742f * mass[i] * massc / (radc * radc) + acc_2;
    }
  }
}
