"""Child process for ``twopoint optimize-external``: f(w) = ||w - center||_2.

    twopoint optimize-external --command "python scripts/hidden_center_child.py 0.3,-0.2,0.1,0.4,0.0" \
        --d 5 --T 5000 --seed 1

With ``--nan`` every answer is ``VAL nan`` (exercises protocol validation).
"""

import argparse
import sys

import numpy as np

from twopoint.external import serve


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("center", help="comma-separated coordinates of the hidden minimizer")
    parser.add_argument("--nan", action="store_true")
    args = parser.parse_args()
    center = np.array([float(c) for c in args.center.split(",")])
    if args.nan:
        return serve(lambda x: float("nan"), sys.stdin, sys.stdout)
    return serve(lambda x: np.linalg.norm(x - center), sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
