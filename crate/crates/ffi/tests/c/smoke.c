#include <math.h>
#include <stdio.h>
#include "speedlimit.h"

#define CHECK(call)                                                          \
  do {                                                                       \
    SlStatus s_ = (call);                                                    \
    if (s_ != SL_STATUS_OK) {                                                \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, sl_last_error());  \
      return 1;                                                              \
    }                                                                        \
  } while (0)

int main(void) {
  SlSystem *sys = NULL;
  SlTrajectory *traj = NULL;
  CHECK(sl_system_trap_paper(1e-11, 1e-10, 1.38e-23, 295.0, 1.0, &sys));
  const double mean[2] = {0.0, 0.0};
  const double cov[4] = {1.0, 0.0, 0.0, 1.0};
  CHECK(sl_propagate(sys, mean, cov, 2000, &traj));

  double t, mu[2], s[4];
  CHECK(sl_trajectory_state(traj, sl_trajectory_len(traj) - 1, &t, mu, s));
  if (fabs(t - 1.0) > 1e-12 || !(s[0] > 0.0 && s[0] < 1.0)) {
    fprintf(stderr, "terminal state t=%g Sxx=%g\n", t, s[0]);
    return 1;
  }

  SlBoundResult r;
  CHECK(sl_evaluate_bound(traj, "MASTER", 0.0, &r));
  if (!r.satisfied) return 1;
  if (sl_evaluate_bound(traj, "MARGV_FREV0", 0.0, &r) != SL_STATUS_APPLICABILITY) return 1;

  double w;
  CHECK(sl_w2_gaussian(2, mean, cov, mu, s, NULL, &w));
  printf("version %s W2 %.6f Sxx %.6f\n", sl_version(), w, s[0]);

  sl_trajectory_free(traj);
  sl_system_free(sys);
  return 0;
}
