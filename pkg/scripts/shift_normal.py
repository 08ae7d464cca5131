"""Shewhart vs conformal score chart on normal data with a mean shift."""

from _common import parser, write

from conformal_spc import render, simulate


def main():
    args = parser(__doc__, "out/shift_normal").parse_args()
    spec = simulate.PRESET_NORMAL
    print(spec.describe())
    report = simulate.compare_charts(spec, args.alpha, args.reps)
    write(args.out, "report.tsv", render.render_report(report))
    write(args.out, "summary.tsv", render.render_summary(report))
    shew, conf = simulate.run_once(spec, args.alpha, 0)
    write(args.out, "shewhart.svg", render.render_chart(shew, render.RenderSpec(title="Shewhart, normal")))
    write(args.out, "conformal.svg", render.render_chart(conf, render.RenderSpec(title="Conformal, normal")))
    print(render.render_summary(report), end="")


if __name__ == "__main__":
    main()
