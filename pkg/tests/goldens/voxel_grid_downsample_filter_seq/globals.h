/* globals.h -- generated by blxc-0.1.0; do not edit.
 * Synchronization: one ready flag per cross-core variable; the
 * spawn/join of the per-core tasks is the end-of-step barrier.
 */
#ifndef BLX_GLOBALS_H
#define BLX_GLOBALS_H
#include <stdint.h>
#include "blx_runtime.h"

typedef struct { int32_t n; double p[1200][3]; } blx_cloud1200_t;

#define BLX_NUM_TASKS 1
#define BLX_PARALLEL 0

/* signal variables (single writer per step) */
extern blx_cloud1200_t g_cloud__in_1;
extern blx_cloud1200_t g_pre_1;
extern blx_cloud1200_t g_voxel_1;

void blx_init(void);
void blx_step(void);

void blx_task_seq(void);

extern const blx_port_t blx_inports[];
extern const int blx_inport_count;
extern const blx_port_t blx_outports[];
extern const int blx_outport_count;

#endif /* BLX_GLOBALS_H */
