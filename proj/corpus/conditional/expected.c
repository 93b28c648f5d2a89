#include <math.h>

void cond(double const *__restrict__ inp, double *__restrict__ out, int const n)
{
  double a;
  double b;
  int loopy_cond0;

  for (int i = 0; i <= -1 + n; ++i)
  {
    a = inp[i];
    loopy_cond0 = a >= 3;
    if (loopy_cond0)
    {
      b = 2.0 * a;
      for (int j = 0; j <= 2; ++j)
        b = 3.0 * b;
      out[i] = 5.0 * b;
    }
    if (!loopy_cond0)
      out[i] = 4.0 * a;
  }
}
