#include <math.h>
#include <stdio.h>
#include "pertdesign.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            const char *msg = pd_last_error();                        \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,   \
                    #cond, msg ? msg : "no message");                 \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    pd_sensitivity *s = NULL;
    CHECK(pd_sensitivity_benchmark(50, &s) == PD_STATUS_OK);
    CHECK(pd_sensitivity_is_stable(s) == 1);

    double g[50];
    CHECK(pd_sensitivity_impulse(s, g, 50) == PD_STATUS_OK);
    CHECK(fabs(g[0] - 0.57) < 1e-12);

    pd_limits lim = pd_limits_symmetric(0.3, 0.1);
    pd_constraint c;
    CHECK(pd_constraint_bounds(s, NULL, 0, lim, &c) == PD_STATUS_OK);
    CHECK(c.status == PD_CONSTRAINT_STATUS_FEASIBLE);
    CHECK(fabs(c.d_hi - 0.1 / 0.57) < 1e-12);

    double r12[2] = {0.0, 0.0}, xi[2] = {1.0, 1.0};
    pd_design d;
    CHECK(pd_design_step(1.0, r12, xi, 2, -0.05, c, lim, &d) == PD_STATUS_OK);
    CHECK(d.d == c.d_lo && d.chose_lower == 1);

    CHECK(pd_design_step(-1.0, r12, xi, 2, 0.0, c, lim, &d) == PD_STATUS_INVALID_ARGUMENT);
    CHECK(pd_last_error() != NULL);
    pd_sensitivity_free(s);

    pd_experiment *e = NULL;
    CHECK(pd_experiment_new_default(INFINITY, PD_POLICY_DESIGNED, 3, &e) == PD_STATUS_OK);
    pd_step st;
    for (int i = 0; i < 300; i++) {
        CHECK(pd_experiment_step(e, &st) == PD_STATUS_OK);
    }
    CHECK(pd_experiment_time(e) == 300 && st.t == 299);
    double theta[16];
    size_t n = 0;
    CHECK(pd_experiment_theta(e, theta, 16, &n) == PD_STATUS_OK);
    CHECK(n == pd_num_params(3, 3, 1));
    pd_experiment_free(e);

    puts("ok");
    return 0;
}
