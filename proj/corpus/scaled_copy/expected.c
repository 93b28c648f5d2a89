#include <math.h>

static inline int int_floor_div_pos_b(int a, int b)
{
  return (a - (a < 0 ? b - 1 : 0)) / b;
}

static inline int int_min(int a, int b)
{
  return a < b ? a : b;
}

void scaled_copy(float *__restrict__ out, float const *__restrict__ a, int const n)
{
  for (int i_outer = 0; i_outer <= -1 + int_floor_div_pos_b(7 + n, 8); ++i_outer)
  {
    for (int i_inner = 0; i_inner <= int_min(7, -1 + -8 * i_outer + n); ++i_inner)
      out[i_inner + 8 * i_outer] = 2.0f * a[i_inner + 8 * i_outer];
  }
}
