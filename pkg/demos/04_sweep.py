"""Demo 4: an epsilon sweep and the fitted small-amplitude laws.

Repeats the full pipeline of demo 3 over a grid of eps values at fixed
limit amplitude, then fits the laws the construction predicts: the fast
ripple and its spectral tail shrink with eps (log-fit against 1/eps with
negative slope), the frequency correction delta1 grows like eps^2, and the
normalized peak max|u|/eps stays within a constant factor of the limit
amplitude.  Resonant eps values are detected and skipped, not solved.

Run time: about one minute (five full solves).
Usage: python3 demos/04_sweep.py
"""

from kgperiodic import Nonlinearity, epsilon_sweep

AMPLITUDE = 0.9
EPS_GRID = (0.096, 0.1015, 0.1175, 0.148, 0.193)


def main() -> None:
    model = Nonlinearity.sine_gordon()
    print(f"model {model.name}, amplitude {AMPLITUDE}, "
          f"eps grid {EPS_GRID}")
    print("(each point is a closure + nested solve; expect ~1 min)")
    report = epsilon_sweep(model, AMPLITUDE, EPS_GRID)

    print()
    print(f"{'eps':>8} {'skip':>5} {'conv':>5} {'residual':>11} "
          f"{'max|u|/eps':>11} {'tail':>10} {'delta1':>10}")
    for row in report.rows:
        print(f"{row.eps:>8.4f} {int(row.resonant_skip):>5} "
              f"{int(row.converged):>5} {row.residual:>11.2e} "
              f"{row.max_u_over_eps:>11.6f} {row.tail:>10.2e} "
              f"{row.delta1:>10.6f}")

    print()
    print(f"converged points: {report.n_converged} of {len(report.rows)}; "
          f"fits valid: {report.fits_valid}")
    print(f"tail law:   log tail vs 1/eps slope {report.tail_slope:+.4f} "
          f"(R^2 = {report.tail_r2:.4f})")
    print(f"w-norm law: log |w|  vs 1/eps slope {report.w_slope:+.4f} "
          f"(R^2 = {report.w_r2:.4f})")
    print(f"delta1 law: log d1   vs 1/eps slope {report.delta1_slope:+.4f} "
          f"(negative: delta1 grows with eps)")
    print(f"amplitude ratio max/min of (max|u|/eps) = "
          f"{report.amplitude_ratio:.4f}")
    print()
    print("The per-row identity max|u|/eps = a + delta1 explains the drift")
    print("in the fourth column: delta1 ~ 6 eps^2 for this model, so the")
    print("normalized peak rises with eps while staying within a factor of")
    print("two of the limit amplitude.")


if __name__ == "__main__":
    main()
