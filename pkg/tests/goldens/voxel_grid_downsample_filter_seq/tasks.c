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
  { double th = 0.02;
    double c = cos(th), s = sin(th);
    g_pre_1.n = g_cloud__in_1.n;
    for (int i = 0; i < g_cloud__in_1.n; i++) {
      double sx = 0.001 * g_cloud__in_1.p[i][0]; double sy = 0.001 * g_cloud__in_1.p[i][1]; double sz = 0.001 * g_cloud__in_1.p[i][2];
      g_pre_1.p[i][0] = (((sx * c) + (sy * (-s))) + (sz * 0.0)) + 1.5;
      g_pre_1.p[i][1] = (((sx * s) + (sy * c)) + (sz * 0.0)) + -0.9;
      g_pre_1.p[i][2] = (((sx * 0.0) + (sy * 0.0)) + (sz * 1.0)) + 0.08;
    }
  }
  /* voxel (Toolbox) */
  { static double kx[1200], ky[1200], kz[1200]; int32_t m = 0;
    for (int i = 0; i < g_pre_1.n; i++) {
      double cx = floor(g_pre_1.p[i][0] / 0.4);
      double cy = floor(g_pre_1.p[i][1] / 0.4);
      double cz = floor(g_pre_1.p[i][2] / 0.4);
      int found = 0;
      for (int q = 0; q < m; q++) {
        if (kx[q] == cx && ky[q] == cy && kz[q] == cz) { found = 1; break; }
      }
      if (!found) {
        kx[m] = cx; ky[m] = cy; kz[m] = cz;
        for (int j = 0; j < 3; j++) g_voxel_1.p[m][j] = g_pre_1.p[i][j];
        m++;
      }
    }
    g_voxel_1.n = m;
  }
  /* cloud__out (Outport) */
  /* read by the harness after the step */
}
