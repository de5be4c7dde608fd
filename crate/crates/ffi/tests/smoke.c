#include <math.h>
#include <stdio.h>
#include "pbdw.h"

/* G = I2, background e1, point observations of both nodes. */
int main(void) {
    double l[2] = {1.0, 0.0};
    double k[4] = {1.0, 0.0, 0.0, 1.0};
    double y[2] = {3.0, 4.0};
    double z[1], eta[2], obj, beta;
    PbdwOperator *op = NULL;
    if (pbdw_operator_new(l, 2, 1, k, 0.0, NULL, NULL, &op) != PBDW_STATUS_OK) return 1;
    if (pbdw_operator_solve(op, y, 2, z, eta, &obj) != PBDW_STATUS_OK) return 2;
    if (fabs(z[0] - 3.0) > 1e-12 || fabs(eta[1] - 4.0) > 1e-12) return 3;
    if (pbdw_inf_sup_beta(op, &beta) != PBDW_STATUS_OK || fabs(beta - 1.0) > 1e-12) return 4;
    if (pbdw_operator_solve(op, y, 3, z, eta, &obj) != PBDW_STATUS_DIMENSION_MISMATCH) return 5;
    char msg[256];
    if (pbdw_last_error_message(msg, sizeof msg) == 0) return 6;
    pbdw_operator_free(op);
    printf("ok %s\n", pbdw_version());
    return 0;
}
