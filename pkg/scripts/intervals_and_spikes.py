"""Conformal interval chart and uncertainty-spike chart on labeled data.

The interval chart uses a least-squares line on a mean-shifted stream. The
spike chart uses a kNN regressor on the noise-shift preset, where the
response stays on target but the noise grows after onset.
"""

from _common import parser, write

from conformal_spc import calibration as cal
from conformal_spc import charts, render, simulate
from conformal_spc.core import LabeledPoint, labeled_arrays
from conformal_spc.scores import LeastSquaresLine, fit_model_residual


def interval_chart(alpha):
    spec = simulate.SimulationSpec(simulate.Normal(), 500, 120, None, seed=4)
    train, calib, stream = simulate.generate_labeled(spec, 500)
    X, y = labeled_arrays(train)
    line = LeastSquaresLine.fit(X, y)
    model = cal.calibrate(fit_model_residual(line), calib, alpha)
    # offset the response after point 60
    stream = [LabeledPoint(p.x, p.y + (2.5 if i >= 60 else 0.0)) for i, p in enumerate(stream)]
    return charts.conformal_interval_chart(model, line, stream)


def main():
    p = parser(__doc__, "out/intervals_and_spikes")
    p.set_defaults(alpha=0.05, reps=50)
    args = p.parse_args()
    interval = interval_chart(args.alpha)
    write(args.out, "interval.svg", render.render_chart(interval, render.RenderSpec(title="Conformal interval")))
    spike = simulate.spike_run(simulate.PRESET_SPIKE, args.alpha)
    write(args.out, "spike.svg", render.render_chart(spike, render.RenderSpec(title="Uncertainty spikes")))
    timing = simulate.spike_timing(simulate.PRESET_SPIKE, args.alpha, args.reps)
    print(f"onset {timing.onset}: median first spike {timing.median_first_spike}, "
          f"median first limit {timing.median_first_limit} over {args.reps} runs")
    covered, total = simulate.interval_coverage(simulate.SimulationSpec(simulate.Normal(), 500, 100, seed=5),
                                                args.alpha, args.reps)
    print(f"interval coverage {covered / total:.4f} (target {1 - args.alpha})")


if __name__ == "__main__":
    main()
