"""Compare Picard iterates with the backward lens-frame construction at one time.

Prints the relative L2 gap for each iterate count next to the quadrature and
step-doubling error estimates, which shows how many iterates the quadrature
error floor admits.
"""
import argparse

from inls_lab.core_model import ModelParams, GridSpec, norm
from inls_lab.profiles import datum_field, make_datum, scale_to_smallness
from inls_lab.scattering_lab import construct_final_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=float, default=50.0)
    ap.add_argument("--max-iter", type=int, default=6)
    ap.add_argument("--quad", type=int, default=64)
    args = ap.parse_args()

    p = ModelParams(1, 1.2, 0.4, 0.5)
    g = GridSpec("line1d", 40, 4096)
    datum = make_datum(p, scale_to_smallness(p, datum_field(g, "x_gauss"), 0.3), 0.42, 0.95)
    times = [args.t]

    back, _ = construct_final_state(p, datum, 1e6, 10, times=times)
    fine, _ = construct_final_state(p, datum, 1e6, 10, times=times, steps_per_decade=512)
    ref = back.states[0]
    print(f"backward step-doubling estimate: {norm(ref - fine.states[0]) / norm(ref):.2e}")
    for k in range(1, args.max_iter + 1):
        a, _ = construct_final_state(p, datum, 1e6, 10, times=times, method="picard",
                                     picard_iterations=k, quad_per_decade=args.quad)
        b, _ = construct_final_state(p, datum, 1e6, 10, times=times, method="picard",
                                     picard_iterations=k, quad_per_decade=2 * args.quad)
        gap = norm(a.states[0] - ref) / norm(ref)
        quad = norm(a.states[0] - b.states[0]) / norm(a.states[0])
        print(f"iterates={k}  gap to backward={gap:.2e}  quadrature estimate={quad:.2e}")


if __name__ == "__main__":
    main()
