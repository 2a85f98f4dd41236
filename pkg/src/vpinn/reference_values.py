"""Published reference results for the five benchmark tables.

These numbers are the previously reported values for each benchmark
row, bundled verbatim so `reproduce-table` can print a side-by-side
diff.  They are reference data, not produced by this package; fresh
runs land near them but not on them (random initialization, unreported
seeds).

Row layout: (epsilon, mu) -> (loss, max, rel_max, l2, rel_l2).
"""

__all__ = ["REFERENCE_TABLES", "TABLE_PROBLEMS"]

TABLE_PROBLEMS = {1: "cd1", 2: "parab1", 3: "rd1", 4: "tp1", 5: "parab2"}

REFERENCE_TABLES = {
    1: {
        (1e-1, None): (4.64323e-08, 3.74317e-05, 5.39757e-05, 2.11394e-05, 4.58645e-06),
        (1e-2, None): (3.82179e-07, 2.89887e-04, 3.07275e-04, 1.43689e-04, 2.55847e-05),
        (1e-3, None): (4.27739e-06, 5.31852e-04, 5.37301e-04, 1.45876e-04, 2.55877e-05),
        (1e-4, None): (1.64225e-05, 1.77413e-03, 1.79224e-03, 9.12843e-04, 1.60119e-04),
        (1e-5, None): (1.80347e-05, 2.38985e-03, 2.41423e-03, 1.16507e-03, 2.04361e-04),
    },
    2: {
        (1e-1, None): (3.79781e-07, 4.73222e-04, 2.05343e-03, 2.63204e-04, 1.68000e-03),
        (1e-2, None): (8.91816e-06, 4.82719e-03, 1.62415e-02, 1.33777e-03, 7.13798e-03),
        (1e-3, None): (3.38240e-06, 2.65777e-03, 8.64250e-03, 1.30504e-03, 6.87290e-03),
        (1e-4, None): (1.31400e-04, 8.27751e-03, 2.69155e-02, 2.06461e-03, 1.08731e-02),
        (1e-5, None): (3.39702e-05, 2.12925e-02, 6.92356e-02, 2.31294e-03, 1.21809e-02),
    },
    3: {
        (1e-1, None): (2.97115e-08, 4.52220e-04, 4.58385e-04, 2.16551e-04, 2.60098e-05),
        (1e-2, None): (1.66846e-06, 4.05634e-02, 4.05634e-02, 7.09868e-03, 7.24451e-04),
        (1e-3, None): (2.29249e-06, 2.59871e-02, 2.59871e-02, 4.08781e-03, 4.12932e-04),
        (1e-4, None): (5.23947e-06, 3.31051e-02, 3.31051e-02, 6.11351e-03, 6.17558e-04),
        (1e-5, None): (2.53564e-06, 2.41746e-02, 2.41746e-02, 6.53846e-03, 6.60484e-04),
    },
    4: {
        (1e-1, 1e-2): (3.06321e-07, 3.80754e-04, 3.66852e-04, 2.03801e-04, 8.37204e-06),
        (1e-2, 1e-3): (2.61157e-08, 2.89321e-04, 1.51199e-04, 1.27626e-04, 2.79353e-06),
        (1e-3, 1e-4): (5.32722e-07, 2.85333e-03, 1.21211e-03, 8.97248e-04, 5.37536e-04),
        (1e-4, 1e-5): (9.44896e-07, 2.15509e-02, 8.39448e-03, 4.27543e-03, 2.45244e-03),
    },
    5: {
        (1e-1, 1e-2): (2.11662e-08, 9.28079e-05, 1.47207e-03, 4.98550e-05, 1.11424e-03),
        (1e-2, 1e-3): (6.82480e-06, 1.59839e-03, 7.02785e-03, 8.08532e-04, 4.99766e-03),
        (1e-3, 1e-4): (2.49291e-05, 5.49714e-03, 1.65834e-02, 1.62604e-03, 7.03748e-03),
        (1e-4, 1e-5): (3.25968e-05, 2.22948e-02, 6.18356e-02, 3.18900e-03, 1.27222e-02),
    },
}
