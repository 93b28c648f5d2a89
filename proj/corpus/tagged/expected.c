#include <math.h>

void rot(double const *__restrict__ inp1, double const *__restrict__ inp2, double *__restrict__ out1, double *__restrict__ out2, double const alpha, int const n)
{
  double a;
  double b;
  double r;

  for (int i = 0; i <= -1 + n; ++i)
  {
    a = cos(alpha) * inp1[i] + sin(alpha) * inp2[i];
    b = -(sin(alpha) * inp1[i]) + cos(alpha) * inp2[i];
    r = sqrt(a * a + b * b);
    a = a / r;
    b = b / r;
    out1[i] = a;
    out2[i] = b;
  }
}
