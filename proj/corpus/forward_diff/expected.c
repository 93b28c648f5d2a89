#include <math.h>

void diff(float *__restrict__ result, float const *__restrict__ u, int const n)
{
  float u_acc_0[17];

  for (int i_outer = 0; i_outer <= -1 + n / 16; ++i_outer)
  {
    for (int j = 0; j <= 16; ++j)
      u_acc_0[j] = u[16 * i_outer + j];
    for (int i_inner = 0; i_inner <= 15; ++i_inner)
      result[i_inner + 16 * i_outer] = u_acc_0[1 + i_inner] + -1.0f * u_acc_0[i_inner];
  }
}
