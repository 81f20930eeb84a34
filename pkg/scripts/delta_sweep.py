"""Relative gap between the N=40 chained upper bound and cos(2 theta) on theta = k pi/84."""

import math
import sys

from localcontent.chained import optimize_chained

if __name__ == "__main__":
    N = int(sys.argv[1]) if len(sys.argv) > 1 else 40
    print("k,theta,upper_bound,cos2theta,delta")
    for k in range(1, 21):
        t = k * math.pi / 84
        r = optimize_chained(N, t)
        print(f"{k},{t:.9g},{r.upper_bound:.9g},{math.cos(2 * t):.9g},{r.delta:.3e}")
    sys.stdout.flush()
