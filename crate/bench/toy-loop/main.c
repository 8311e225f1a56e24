/* Small loop-heavy kernel: matrix product, a 1-D stencil, and a checksum. */
#include <stdio.h>
#include <stdint.h>

#define N 256
#define STEPS 3000
#define LEN 4096

static double a[N][N], b[N][N], c[N][N];
static double u[LEN], v[LEN];

static void init(void)
{
    uint32_t x = 12345u;
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++) {
            x = x * 1103515245u + 12345u;
            a[i][j] = (double)(x >> 16) / 65536.0;
            x = x * 1103515245u + 12345u;
            b[i][j] = (double)(x >> 16) / 65536.0;
        }
    for (int i = 0; i < LEN; i++)
        u[i] = (double)(i % 17) / 17.0;
}

static void matmul(void)
{
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            c[i][j] = 0.0;
    for (int i = 0; i < N; i++)
        for (int k = 0; k < N; k++) {
            double aik = a[i][k];
            for (int j = 0; j < N; j++)
                c[i][j] += aik * b[k][j];
        }
}

static void stencil(void)
{
    for (int s = 0; s < STEPS; s++) {
        for (int i = 1; i < LEN - 1; i++)
            v[i] = 0.25 * u[i - 1] + 0.5 * u[i] + 0.25 * u[i + 1];
        v[0] = u[0];
        v[LEN - 1] = u[LEN - 1];
        for (int i = 0; i < LEN; i++)
            u[i] = v[i];
    }
}

int main(void)
{
    init();
    double sum = 0.0;
    for (int r = 0; r < 4; r++) {
        matmul();
        stencil();
        for (int i = 0; i < N; i++)
            sum += c[i][(i * 7) % N];
        a[r][r] += 1.0;
    }
    for (int i = 0; i < LEN; i += 64)
        sum += u[i];
    printf("%.6e\n", sum);
    return 0;
}
