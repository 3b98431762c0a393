#!/usr/bin/env python3
"""Transfer vs from-scratch identification on held-out classes.

Trains a student on 30 source classes, freezes everything up to the mimic
layer, reinitializes the identity layer and head for 20 unseen classes, and
compares top-1 error against a from-scratch model at equal epochs on the
same small target split.
"""

import argparse

import numpy as np

from skd.benchmark import transfer_comparison

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, nargs="+", default=[11, 12, 13])
    args = ap.parse_args()

    t_errs, s_errs = [], []
    print(f"{'seed':>5} {'transferred':>12} {'scratch':>9}")
    for seed in args.seeds:
        te, se = transfer_comparison(seed)
        t_errs.append(te)
        s_errs.append(se)
        print(f"{seed:>5} {te:>12.3f} {se:>9.3f}")
    print(f"{'mean':>5} {np.mean(t_errs):>12.3f} {np.mean(s_errs):>9.3f}")
