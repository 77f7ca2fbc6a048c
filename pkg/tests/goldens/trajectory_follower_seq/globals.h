/* globals.h -- generated by blxc-0.1.0; do not edit.
 * Synchronization: one ready flag per cross-core variable; the
 * spawn/join of the per-core tasks is the end-of-step barrier.
 */
#ifndef BLX_GLOBALS_H
#define BLX_GLOBALS_H
#include <stdint.h>
#include "blx_runtime.h"

#define BLX_NUM_TASKS 1
#define BLX_PARALLEL 0

/* signal variables (single writer per step) */
extern double g_lateral_stanley_atan__term_1;
extern double g_lateral_stanley_ratio_1;
extern double g_lateral_stanley_sat_1;
extern double g_lateral_stanley_steer__sum_1;
extern double g_lateral_terr_cos__ref_1;
extern double g_lateral_terr_ct__sum_1;
extern double g_lateral_terr_dx_1;
extern double g_lateral_terr_dy_1;
extern double g_lateral_terr_dyaw_1;
extern double g_lateral_terr_he__sin_1;
extern double g_lateral_terr_sin__neg_1;
extern double g_lateral_terr_sin__ref_1;
extern double g_lateral_terr_t__dx_1;
extern double g_lateral_terr_t__dy_1;
extern double g_longitudinal_pid_accel__relu_1;
extern double g_longitudinal_pid_brake__relu_1;
extern double g_longitudinal_pid_d__term_1;
extern double g_longitudinal_pid_deriv_1;
extern double g_longitudinal_pid_err_1;
extern double g_longitudinal_pid_i__term_1;
extern double g_longitudinal_pid_integ_1;
extern double g_longitudinal_pid_integ__delay_1;
extern double g_longitudinal_pid_p__term_1;
extern double g_longitudinal_pid_prev__err_1;
extern double g_longitudinal_pid_u__neg_1;
extern double g_longitudinal_pid_u__sum_1;
extern double g_v__now_1;
extern double g_v__ref_1;
extern double g_x__now_1;
extern double g_x__ref_1;
extern double g_y__now_1;
extern double g_y__ref_1;
extern double g_yaw__now_1;
extern double g_yaw__ref_1;

/* unit-delay states (latched at end of step) */
extern double s_longitudinal_pid_integ__delay_state;
extern double s_longitudinal_pid_prev__err_state;

void blx_init(void);
void blx_step(void);

void blx_task_seq(void);

extern const blx_port_t blx_inports[];
extern const int blx_inport_count;
extern const blx_port_t blx_outports[];
extern const int blx_outport_count;

#endif /* BLX_GLOBALS_H */
