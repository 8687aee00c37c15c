#!/usr/bin/env python3
"""Writes the default simulation calibration (data/calibration_default.json).

Risk-factor moments are FF5-like monthly values. Loadings of the unselected
factors are drawn once from N(0, 0.5^2) and residual volatilities uniformly
from [4%, 8%]; both are frozen in the output so the file, not this
script, is the fixture.
"""
import argparse
import json

import numpy as np

NAMES = ["MKT", "SMB", "HML", "RMW", "CMA"]
MEANS = [0.0065, 0.0045, 0.0048, 0.0035, 0.0030]
VOLS = [0.045, 0.030, 0.030, 0.022, 0.020]
CORR = [
    [1.00, 0.25, -0.20, -0.20, -0.35],
    [0.25, 1.00, 0.05, -0.30, 0.00],
    [-0.20, 0.05, 1.00, 0.10, 0.25],
    [-0.20, -0.30, 0.10, 1.00, 0.05],
    [-0.35, 0.00, 0.25, 0.05, 1.00],
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k2", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20240101)
    ap.add_argument("--resid-lo", type=float, default=0.04)
    ap.add_argument("--resid-hi", type=float, default=0.08)
    ap.add_argument("--out", default="data/calibration_default.json")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    vols = np.array(VOLS)
    sigma1 = np.outer(vols, vols) * np.array(CORR)
    beta = rng.normal(0.0, 0.5, size=(len(MEANS), args.k2))
    resid_vol = rng.uniform(args.resid_lo, args.resid_hi, size=args.k2)

    doc = {
        "description": "FF5-like monthly risk factors; unselected factors load on them with frozen N(0, 0.25) betas",
        "risk_factor_labels": NAMES,
        "t_obs": 3000,
        "mu1": [round(m, 6) for m in MEANS],
        "sigma1": [[round(float(x), 10) for x in row] for row in sigma1],
        "beta": [[round(float(x), 6) for x in row] for row in beta],
        # diagonal residual covariance, stored as variances
        "sigma2": [round(float(v * v), 10) for v in resid_vol],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
