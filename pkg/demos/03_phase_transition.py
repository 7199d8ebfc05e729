"""Map the recovery phase transition and render it as an SVG figure.

Success flips from impossible to routine as the probe count M crosses a
small multiple of dim(T) = 2nr - r**2.  The sweep below uses a reduced
trial count so it finishes in about a minute; the shipped acceptance
suite runs the full 20-trial version.  Outputs land next to this script:
``phase_sweep.csv``, ``phase_sweep.summary.csv`` and ``phase_sweep.svg``.
"""

import pathlib

from hessrec.bench import ExperimentConfig, emit_plot, phase_sweep, summarize

here = pathlib.Path(__file__).resolve().parent
out_csv = here / "phase_sweep.csv"

# --------------------------------------------------------------------------
# Two dimensions, two ranks, M on a grid of dim(T) multiples (automatic;
# values above n**2 are clamped since the constraints determine the matrix
# uniquely there).
cfg = ExperimentConfig(
    n_list=(10, 20),
    r_list=(1, 2),
    trials=8,
    workers=8,
    output_path=str(out_csv),
)
records = phase_sweep(cfg)

print(f"{'n':>4} {'r':>3} {'M':>5} {'success':>9} {'median error':>14}")
for row in summarize(records):
    print(f"{row['n']:>4} {row['r']:>3} {row['M']:>5} "
          f"{row['successes']:>4}/{row['trials']:<4} {row['median_rel_error']:>14.2e}")

# --------------------------------------------------------------------------
# One polyline per (n, r); the curves align when M is read in units of
# dim(T), which is exactly the low-rank degrees-of-freedom count.
emit_plot(str(out_csv), "phase", str(here / "phase_sweep.svg"))
print(f"\nwrote {out_csv}")
print(f"wrote {here / 'phase_sweep.svg'}")
