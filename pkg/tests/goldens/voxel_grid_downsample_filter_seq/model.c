/* model.c -- generated by blxc-0.1.0; do not edit.
 * Synchronization: one ready flag per cross-core variable; the
 * spawn/join of the per-core tasks is the end-of-step barrier.
 */
#include "globals.h"

blx_cloud1200_t g_cloud__in_1;
blx_cloud1200_t g_pre_1;
blx_cloud1200_t g_voxel_1;

const blx_port_t blx_inports[] = {
  { "cloud_in", BLX_CLOUD, 1200, 3, (void *)&g_cloud__in_1.n, (void *)&g_cloud__in_1.p[0][0] },
};
const int blx_inport_count = 1;

const blx_port_t blx_outports[] = {
  { "cloud_out", BLX_CLOUD, 1200, 3, (void *)&g_voxel_1.n, (void *)&g_voxel_1.p[0][0] },
};
const int blx_outport_count = 1;

void blx_init(void) {
}

static void blx_state_update(void) {
}

void blx_step(void) {
  blx_task_seq();
  blx_state_update();
}
