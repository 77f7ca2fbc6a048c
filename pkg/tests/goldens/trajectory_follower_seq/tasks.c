/* tasks.c -- generated by blxc-0.1.0; do not edit.
 * Synchronization: one ready flag per cross-core variable; the
 * spawn/join of the per-core tasks is the end-of-step barrier.
 */
#include <math.h>
#include "globals.h"

static double blx_clamp(double x, double lo, double hi) {
  if (x < lo) return lo;
  if (x > hi) return hi;
  return x;
}

void blx_task_seq(void) {
  /* longitudinal_pid_integ__delay (UnitDelay) */
  g_longitudinal_pid_integ__delay_1 = s_longitudinal_pid_integ__delay_state;
  /* longitudinal_pid_prev__err (UnitDelay) */
  g_longitudinal_pid_prev__err_1 = s_longitudinal_pid_prev__err_state;
  /* v__now (Inport) */
  /* written by the harness before the step */
  /* v__ref (Inport) */
  /* written by the harness before the step */
  /* longitudinal_pid_err (Sum) */
  g_longitudinal_pid_err_1 = (g_v__ref_1 - g_v__now_1);
  /* longitudinal_pid_deriv (Sum) */
  g_longitudinal_pid_deriv_1 = (g_longitudinal_pid_err_1 - g_longitudinal_pid_prev__err_1);
  /* longitudinal_pid_d__term (Gain) */
  g_longitudinal_pid_d__term_1 = 0.15 * g_longitudinal_pid_deriv_1;
  /* longitudinal_pid_integ (Sum) */
  g_longitudinal_pid_integ_1 = (g_longitudinal_pid_err_1 + g_longitudinal_pid_integ__delay_1);
  /* longitudinal_pid_i__term (Gain) */
  g_longitudinal_pid_i__term_1 = 0.35 * g_longitudinal_pid_integ_1;
  /* longitudinal_pid_p__term (Gain) */
  g_longitudinal_pid_p__term_1 = 1.2 * g_longitudinal_pid_err_1;
  /* longitudinal_pid_u__sum (Sum) */
  g_longitudinal_pid_u__sum_1 = ((g_longitudinal_pid_p__term_1 + g_longitudinal_pid_i__term_1) + g_longitudinal_pid_d__term_1);
  /* longitudinal_pid_accel__relu (ElementwiseMap) */
  g_longitudinal_pid_accel__relu_1 = ((g_longitudinal_pid_u__sum_1) > 0.0 ? (g_longitudinal_pid_u__sum_1) : 0.0);
  /* accel (Outport) */
  /* read by the harness after the step */
  /* longitudinal_pid_u__neg (ElementwiseMap) */
  g_longitudinal_pid_u__neg_1 = -(g_longitudinal_pid_u__sum_1);
  /* longitudinal_pid_brake__relu (ElementwiseMap) */
  g_longitudinal_pid_brake__relu_1 = ((g_longitudinal_pid_u__neg_1) > 0.0 ? (g_longitudinal_pid_u__neg_1) : 0.0);
  /* brake (Outport) */
  /* read by the harness after the step */
  /* x__now (Inport) */
  /* written by the harness before the step */
  /* x__ref (Inport) */
  /* written by the harness before the step */
  /* lateral_terr_dx (Sum) */
  g_lateral_terr_dx_1 = (g_x__ref_1 - g_x__now_1);
  /* y__now (Inport) */
  /* written by the harness before the step */
  /* y__ref (Inport) */
  /* written by the harness before the step */
  /* lateral_terr_dy (Sum) */
  g_lateral_terr_dy_1 = (g_y__ref_1 - g_y__now_1);
  /* yaw__now (Inport) */
  /* written by the harness before the step */
  /* yaw__ref (Inport) */
  /* written by the harness before the step */
  /* lateral_terr_cos__ref (ElementwiseMap) */
  g_lateral_terr_cos__ref_1 = cos(g_yaw__ref_1);
  /* lateral_terr_dyaw (Sum) */
  g_lateral_terr_dyaw_1 = (g_yaw__ref_1 - g_yaw__now_1);
  /* lateral_terr_he__sin (ElementwiseMap) */
  g_lateral_terr_he__sin_1 = sin(g_lateral_terr_dyaw_1);
  /* lateral_terr_sin__ref (ElementwiseMap) */
  g_lateral_terr_sin__ref_1 = sin(g_yaw__ref_1);
  /* lateral_terr_sin__neg (ElementwiseMap) */
  g_lateral_terr_sin__neg_1 = -(g_lateral_terr_sin__ref_1);
  /* lateral_terr_t__dx (Product) */
  g_lateral_terr_t__dx_1 = (g_lateral_terr_sin__neg_1 * g_lateral_terr_dx_1);
  /* lateral_terr_t__dy (Product) */
  g_lateral_terr_t__dy_1 = (g_lateral_terr_cos__ref_1 * g_lateral_terr_dy_1);
  /* lateral_terr_ct__sum (Sum) */
  g_lateral_terr_ct__sum_1 = (g_lateral_terr_t__dx_1 + g_lateral_terr_t__dy_1);
  /* lateral_stanley_ratio (FunctionBlock) */
  {
    g_lateral_stanley_ratio_1 = ((2.5 * g_lateral_terr_ct__sum_1) / (g_v__now_1 + 0.1));
  }
  /* lateral_stanley_atan__term (ElementwiseMap) */
  g_lateral_stanley_atan__term_1 = atan(g_lateral_stanley_ratio_1);
  /* lateral_stanley_steer__sum (Sum) */
  g_lateral_stanley_steer__sum_1 = (g_lateral_terr_he__sin_1 + g_lateral_stanley_atan__term_1);
  /* lateral_stanley_sat (Saturate) */
  g_lateral_stanley_sat_1 = blx_clamp(g_lateral_stanley_steer__sum_1, -0.6109, 0.6109);
  /* steer (Outport) */
  /* read by the harness after the step */
}
