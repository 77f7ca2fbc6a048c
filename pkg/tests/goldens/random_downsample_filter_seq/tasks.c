/* tasks.c -- generated by blxc-0.1.0; do not edit.
 * Synchronization: one ready flag per cross-core variable; the
 * spawn/join of the per-core tasks is the end-of-step barrier.
 */
#include <math.h>
#include "globals.h"

void blx_task_seq(void) {
  /* cloud__in (Inport) */
  /* written by the harness before the step */
  /* pre (Toolbox) */
  { double th = 0.015;
    double c = cos(th), s = sin(th);
    g_pre_1.n = g_cloud__in_1.n;
    for (int i = 0; i < g_cloud__in_1.n; i++) {
      double sx = 0.001 * g_cloud__in_1.p[i][0]; double sy = 0.001 * g_cloud__in_1.p[i][1]; double sz = 0.001 * g_cloud__in_1.p[i][2];
      g_pre_1.p[i][0] = (((sx * c) + (sy * (-s))) + (sz * 0.0)) + 1.2;
      g_pre_1.p[i][1] = (((sx * s) + (sy * c)) + (sz * 0.0)) + -0.8;
      g_pre_1.p[i][2] = (((sx * 0.0) + (sy * 0.0)) + (sz * 1.0)) + 0.05;
    }
  }
  /* sample (Toolbox) */
  if (g_pre_1.n <= 512) {
    g_sample_1.n = g_pre_1.n;
    for (int32_t i = 0; i < g_pre_1.n; i++) for (int j = 0; j < 3; j++) g_sample_1.p[i][j] = g_pre_1.p[i][j];
  } else {
    static int32_t idx[2048];
    blx_rng_t rng; blx_rng_seed(&rng, 20240611ULL);
    for (int32_t i = 0; i < g_pre_1.n; i++) idx[i] = i;
    for (int32_t i = 0; i < 512; i++) {
      int32_t j = i + (int32_t)blx_rng_below(&rng, (uint64_t)(g_pre_1.n - i));
      int32_t t = idx[i]; idx[i] = idx[j]; idx[j] = t;
    }
    blx_sort_i32(idx, 512);
    g_sample_1.n = 512;
    for (int32_t i = 0; i < 512; i++) for (int j = 0; j < 3; j++) g_sample_1.p[i][j] = g_pre_1.p[idx[i]][j];
  }
  /* cloud__out (Outport) */
  /* read by the harness after the step */
}
