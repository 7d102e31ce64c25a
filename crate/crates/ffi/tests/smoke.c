#include <stdio.h>
#include <string.h>

#include "ptpinn.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        PtStatus s_ = (call);                                              \
        if (s_ != PT_STATUS_OK) {                                          \
            fprintf(stderr, "%s -> %d: %s\n", #call, s_, ptpinn_last_error()); \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    PtNetwork *net = NULL;
    PtProblem *problem = NULL;
    CHECK(ptpinn_network_new_mlp(2, 2, 6, 3, &net));
    CHECK(ptpinn_problem_new("reaction", 5.0, NULL, &problem));

    double pts[4] = {0.1, 0.2, 3.0, 0.9};
    double u[2];
    CHECK(ptpinn_network_predict(net, pts, 2, u));

    CHECK(ptpinn_network_save(net, "net.ckpt"));
    PtNetwork *back = NULL;
    CHECK(ptpinn_network_load("net.ckpt", &back));
    double v[2];
    CHECK(ptpinn_network_predict(back, pts, 2, v));
    if (memcmp(u, v, sizeof u) != 0) {
        fprintf(stderr, "checkpoint round trip changed outputs\n");
        return 1;
    }

    PtScores scores;
    CHECK(ptpinn_score(net, problem, 200, 1, &scores));

    if (ptpinn_network_load("missing.ckpt", &back) != PT_STATUS_IO || strlen(ptpinn_last_error()) == 0) {
        fprintf(stderr, "expected an i/o error\n");
        return 1;
    }

    ptpinn_network_free(net);
    ptpinn_network_free(back);
    ptpinn_problem_free(problem);
    printf("ok %s l2=%g\n", ptpinn_precision(), scores.l2_rel);
    return 0;
}
