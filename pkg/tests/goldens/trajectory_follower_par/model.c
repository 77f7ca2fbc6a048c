/* model.c -- generated by blxc-0.1.0; do not edit.
 * Synchronization: one ready flag per cross-core variable; the
 * spawn/join of the per-core tasks is the end-of-step barrier.
 */
#include "globals.h"

double g_lateral_stanley_atan__term_1;
double g_lateral_stanley_ratio_1;
double g_lateral_stanley_sat_1;
double g_lateral_stanley_steer__sum_1;
double g_lateral_terr_cos__ref_1;
double g_lateral_terr_ct__sum_1;
double g_lateral_terr_dx_1;
double g_lateral_terr_dy_1;
double g_lateral_terr_dyaw_1;
double g_lateral_terr_he__sin_1;
double g_lateral_terr_sin__neg_1;
double g_lateral_terr_sin__ref_1;
double g_lateral_terr_t__dx_1;
double g_lateral_terr_t__dy_1;
double g_longitudinal_pid_accel__relu_1;
double g_longitudinal_pid_brake__relu_1;
double g_longitudinal_pid_d__term_1;
double g_longitudinal_pid_deriv_1;
double g_longitudinal_pid_err_1;
double g_longitudinal_pid_i__term_1;
double g_longitudinal_pid_integ_1;
double g_longitudinal_pid_integ__delay_1;
double g_longitudinal_pid_p__term_1;
double g_longitudinal_pid_prev__err_1;
double g_longitudinal_pid_u__neg_1;
double g_longitudinal_pid_u__sum_1;
double g_v__now_1;
double g_v__ref_1;
double g_x__now_1;
double g_x__ref_1;
double g_y__now_1;
double g_y__ref_1;
double g_yaw__now_1;
double g_yaw__ref_1;
double s_longitudinal_pid_integ__delay_state;
double s_longitudinal_pid_prev__err_state;
blx_flag_t f_lateral_stanley_atan__term_1 = BLX_FLAG_INIT;
blx_flag_t f_lateral_terr_dx_1 = BLX_FLAG_INIT;
blx_flag_t f_longitudinal_pid_err_1 = BLX_FLAG_INIT;
blx_flag_t f_longitudinal_pid_p__term_1 = BLX_FLAG_INIT;
blx_flag_t f_longitudinal_pid_u__sum_1 = BLX_FLAG_INIT;

const blx_port_t blx_inports[] = {
  { "v_now", BLX_SCALAR, 1, 1, (void *)&g_v__now_1, 0 },
  { "v_ref", BLX_SCALAR, 1, 1, (void *)&g_v__ref_1, 0 },
  { "x_now", BLX_SCALAR, 1, 1, (void *)&g_x__now_1, 0 },
  { "x_ref", BLX_SCALAR, 1, 1, (void *)&g_x__ref_1, 0 },
  { "y_now", BLX_SCALAR, 1, 1, (void *)&g_y__now_1, 0 },
  { "y_ref", BLX_SCALAR, 1, 1, (void *)&g_y__ref_1, 0 },
  { "yaw_now", BLX_SCALAR, 1, 1, (void *)&g_yaw__now_1, 0 },
  { "yaw_ref", BLX_SCALAR, 1, 1, (void *)&g_yaw__ref_1, 0 },
};
const int blx_inport_count = 8;

const blx_port_t blx_outports[] = {
  { "accel", BLX_SCALAR, 1, 1, (void *)&g_longitudinal_pid_accel__relu_1, 0 },
  { "brake", BLX_SCALAR, 1, 1, (void *)&g_longitudinal_pid_brake__relu_1, 0 },
  { "steer", BLX_SCALAR, 1, 1, (void *)&g_lateral_stanley_sat_1, 0 },
};
const int blx_outport_count = 3;

void blx_init(void) {
  s_longitudinal_pid_integ__delay_state = 0.0;
  s_longitudinal_pid_prev__err_state = 0.0;
}

static void blx_state_update(void) {
  s_longitudinal_pid_integ__delay_state = g_longitudinal_pid_integ_1;
  s_longitudinal_pid_prev__err_state = g_longitudinal_pid_err_1;
}

static const blx_task_fn blx_task_table[] = {
  blx_task_c0,
  blx_task_c1,
};

void blx_step(void) {
  blx_flag_reset(&f_lateral_stanley_atan__term_1);
  blx_flag_reset(&f_lateral_terr_dx_1);
  blx_flag_reset(&f_longitudinal_pid_err_1);
  blx_flag_reset(&f_longitudinal_pid_p__term_1);
  blx_flag_reset(&f_longitudinal_pid_u__sum_1);
  blx_run_tasks(blx_task_table, BLX_NUM_TASKS);
  blx_state_update();
}
