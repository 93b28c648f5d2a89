#include <math.h>

static inline int int_floor_div_pos_b(int a, int b)
{
  return (a - (a < 0 ? b - 1 : 0)) / b;
}

static inline int int_min(int a, int b)
{
  return a < b ? a : b;
}

void dgemm(int const m, int const n, int const l, double const alpha, double const *__restrict__ a, double const *__restrict__ b, double *__restrict__ c)
{
  double a_acc_0[32][16];
  double b_acc_0[8][32];

  for (int j_outer = 0; j_outer <= -1 + int_floor_div_pos_b(7 + n, 8); ++j_outer)
  {
    for (int i_outer = 0; i_outer <= -1 + int_floor_div_pos_b(15 + m, 16); ++i_outer)
    {
      for (int k_outer = 0; k_outer <= -1 + int_floor_div_pos_b(31 + l, 32); ++k_outer)
      {
        for (int i2_0 = 0; i2_0 <= int_min(7, -1 + -8 * j_outer + n); ++i2_0)
        {
          for (int i1_0 = 0; i1_0 <= int_min(31, -1 + -32 * k_outer + l); ++i1_0)
            b_acc_0[i2_0][i1_0] = b[i1_0 + 32 * k_outer + (i2_0 + 8 * j_outer) * l];
        }
        for (int i2 = 0; i2 <= int_min(31, -1 + -32 * k_outer + l); ++i2)
        {
          for (int i1 = 0; i1 <= int_min(15, -1 + -16 * i_outer + m); ++i1)
            a_acc_0[i2][i1] = a[i1 + 16 * i_outer + (i2 + 32 * k_outer) * m];
        }
        for (int j_inner = 0; j_inner <= int_min(7, -1 + -8 * j_outer + n); ++j_inner)
        {
          for (int k_inner = 0; k_inner <= int_min(31, -1 + -32 * k_outer + l); ++k_inner)
          {
            for (int i_inner = 0; i_inner <= int_min(15, -1 + -16 * i_outer + m); ++i_inner)
              c[i_inner + 16 * i_outer + (j_inner + 8 * j_outer) * m] = c[i_inner + 16 * i_outer + (j_inner + 8 * j_outer) * m] + alpha * b_acc_0[j_inner][k_inner] * a_acc_0[k_inner][i_inner];
          }
        }
      }
    }
  }
}
