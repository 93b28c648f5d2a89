#include <math.h>

static inline int int_floor_div_pos_b(int a, int b)
{
  return (a - (a < 0 ? b - 1 : 0)) / b;
}

static inline int int_min(int a, int b)
{
  return a < b ? a : b;
}

void fill(double *__restrict__ out, double const a, int const n)
{
  for (int i_outer = 0; i_outer <= -1 + int_floor_div_pos_b(127 + n, 128); ++i_outer)
  {
    for (int i_inner = 0; i_inner <= int_min(127, -1 + -128 * i_outer + n); ++i_inner)
      out[i_inner + 128 * i_outer] = a;
  }
}
