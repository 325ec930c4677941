#include <stdio.h>
#include <string.h>
#include "summon.h"

static char buf[1 << 16];

int main(int argc, char **argv) {
    if (argc != 2) return 10;
    FILE *f = fopen(argv[1], "r");
    if (!f) return 11;
    size_t n = fread(buf, 1, sizeof buf - 1, f);
    fclose(f);
    buf[n] = 0;

    SummonTask *task = NULL;
    if (summon_task_from_json(buf, &task, NULL) != SUMMON_STATUS_OK) return 12;

    SummonPlan *plan = NULL;
    if (summon_synthesize(task, 3, &plan, NULL) != SUMMON_STATUS_OK) return 13;

    char *report = NULL;
    if (summon_run_exhaustive(task, plan, 1, 0, &report) != SUMMON_STATUS_OK) return 14;
    int ok = strstr(report, "\"mismatches\":0") != NULL;
    printf("%s\n", report);
    summon_string_free(report);

    double a[2] = {0.0, 0.0}, b[2] = {1.0, 2.0};
    bool precedes = true;
    if (summon_causally_precedes(a, b, 1, &precedes) != SUMMON_STATUS_OK || precedes) return 15;

    summon_plan_free(plan);
    summon_task_free(task);
    return ok ? 0 : 16;
}
