#!/usr/bin/env python3
"""scikit-learn reference for the extremely randomized trees competence check.

Builds the same kind of fixture as the acceptance suite (noiseless Friedman #1,
10,000 rows, every fourth row held out) and reports held-out R² for several
max_features settings, with 200 trees and min_samples_leaf 2.
"""

import numpy as np
from sklearn.ensemble import ExtraTreesRegressor
from sklearn.metrics import r2_score


def friedman(n, n_cols, rng):
    x = rng.random((n, n_cols))
    y = (10 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20 * (x[:, 2] - 0.5) ** 2
         + 10 * x[:, 3] + 5 * x[:, 4])
    return x, y


def main():
    rng = np.random.default_rng(8)
    for n_cols in (5, 10):
        x, y = friedman(10_000, n_cols, rng)
        test = np.arange(len(y)) % 4 == 0
        for label, mf in (("F/3", max(1, n_cols // 3)), ("F", n_cols)):
            et = ExtraTreesRegressor(n_estimators=200, min_samples_leaf=2,
                                     max_features=mf, random_state=0, n_jobs=-1)
            et.fit(x[~test], y[~test])
            r2 = r2_score(y[test], et.predict(x[test]))
            print(f"{n_cols:>2} columns, max_features {label:<3} ({mf}): R2 {r2:.4f}")


if __name__ == "__main__":
    main()
