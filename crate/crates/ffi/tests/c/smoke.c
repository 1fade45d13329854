#include <math.h>
#include <stdio.h>
#include <string.h>

#include "spo.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        enum SpoStatus st_ = (call);                                       \
        if (st_ != SPO_STATUS_OK) {                                        \
            fprintf(stderr, "%s failed: %d (%s)\n", #call, (int)st_,       \
                    spo_last_error() ? spo_last_error() : "no message");   \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    SpoProblem *pb = NULL;
    CHECK(spo_problem_generate("portfolio:n=12,seed=4", &pb));
    size_t n = 0, m = 0, p = 0;
    CHECK(spo_problem_dims(pb, &n, &m, &p));
    if (n != 12 || m != 1 || p != 1) return 2;

    double x0[12];
    size_t needed = 0;
    CHECK(spo_presolve(pb, x0, 12, &needed));

    SpoOptions opts;
    CHECK(spo_options_default(&opts));
    opts.op = SPO_OPERATOR_COMPLEMENTARY;
    opts.step_safety = INFINITY;
    SpoReport *rep = NULL;
    CHECK(spo_solve(pb, x0, n, &opts, &rep));

    enum SpoSolveStatus status;
    CHECK(spo_report_status(rep, &status));
    size_t iters = 0, l0 = 0;
    double obj = 0.0, res = 0.0, f0 = 0.0;
    CHECK(spo_report_summary(rep, &iters, &obj, &l0, &res));
    CHECK(spo_objective(pb, x0, n, opts.delta, &f0));
    double x[12];
    CHECK(spo_report_x(rep, x, 12, NULL));
    char *json = NULL;
    CHECK(spo_report_to_json(rep, &json));
    int has_status = strstr(json, "\"status\"") != NULL;
    spo_string_free(json);

    /* Too-small buffers report the needed length. */
    double tiny[1];
    size_t want = 0;
    if (spo_report_x(rep, tiny, 1, &want) != SPO_STATUS_BUFFER_TOO_SMALL || want != 12) return 3;
    /* Unknown family is rejected with a message. */
    SpoProblem *bad = NULL;
    if (spo_problem_generate("nope:n=3", &bad) != SPO_STATUS_INVALID_ARGUMENT || spo_last_error() == NULL) return 4;
    if (spo_problem_dims(NULL, &n, NULL, NULL) != SPO_STATUS_NULL_POINTER) return 5;

    printf("status=%d iters=%zu f0=%.6f obj=%.6f l0=%zu res=%.3e json=%d\n",
           (int)status, iters, f0, obj, l0, res, has_status);
    spo_report_free(rep);
    spo_problem_free(pb);
    return (status == SPO_SOLVE_STATUS_CONVERGED && res <= 1e-6 && has_status) ? 0 : 6;
}
