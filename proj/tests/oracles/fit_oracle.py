"""Least-squares fits computed with numpy, independent of the C++ fitter.

Usage: fit_oracle.py OUT_DIR [noisy_samples.csv]
"""
import json
import math
import sys
from pathlib import Path

import numpy as np

A, B, UNIT = -22.06, -50.194, 60.0


def fit(d, y):
    x = np.log(np.asarray(d) / UNIT)
    y = np.asarray(y)
    a, b = np.polyfit(x, y, 1)
    pred = a * x + b
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(a), float(b), 1.0 - ss_res / ss_tot


def main(out_dir: Path, noisy_csv: Path | None) -> None:
    d = [UNIT * k for k in range(1, 41)]
    y = [A * math.log(v / UNIT) + B for v in d]
    a, b, r2 = fit(d, y)
    result = {"noiseless_40": {"a": a, "b": b, "r_squared": r2,
                               "max_range_m_at_minus132": UNIT * math.exp((-132 - B) / A)}}
    if noisy_csv is not None:
        rows = noisy_csv.read_text().strip().splitlines()[1:]
        pairs = [tuple(map(float, r.split(","))) for r in rows]
        a, b, r2 = fit([p[0] for p in pairs], [p[1] for p in pairs])
        result["sigma3_seed42_40"] = {"a": a, "b": b, "r_squared": r2}
    (out_dir / "fit_oracle.json").write_text(json.dumps(result, indent=2) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]) if len(sys.argv) > 2 else None)
