"""Conformal p-value chart for a 2-d process with a correlated-structure break.

The shifted points move against the correlation while staying inside each
marginal 3-sigma band, so per-variable Shewhart charts miss them.
"""

import numpy as np
from _common import parser, write

from conformal_spc import charts, render
from conformal_spc.multivariate import calibrate_detector, monitor, train_knn, train_mahalanobis


def main():
    p = parser(__doc__, "out/multivariate")
    p.set_defaults(alpha=0.01)
    p.add_argument("--detector", choices=("mahalanobis", "knn"), default="mahalanobis")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    cov = np.array([[1.0, 0.95], [0.95, 1.0]])
    train = rng.multivariate_normal([0, 0], cov, size=2000)
    calib = rng.multivariate_normal([0, 0], cov, size=999)
    before = rng.multivariate_normal([0, 0], cov, size=60)
    after = rng.multivariate_normal([0, 0], [[1.0, -0.5], [-0.5, 1.0]], size=40)
    stream = np.vstack([before, after])

    det = train_mahalanobis(train) if args.detector == "mahalanobis" else train_knn(train, 10)
    model = calibrate_detector(det, calib, args.alpha)
    series = monitor(det, model, stream)
    write(args.out, "p_value.svg", render.render_chart(series, render.RenderSpec(title="Conformal p-values")))
    for j in range(2):
        shew = charts.shewhart_chart(train[:, j], stream[:, j])
        write(args.out, f"shewhart_v{j + 1}.svg", render.render_chart(shew))
        print(f"v{j + 1} shewhart flags after break: {int(shew.flags()[60:].sum())}/40")
    print(f"p-value flags after break: {int(series.flags()[60:].sum())}/40, before: {int(series.flags()[:60].sum())}/60")


if __name__ == "__main__":
    main()
