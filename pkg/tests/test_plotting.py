import random

from pickopt.alns import AlnsConfig, run
from pickopt.bench import bm2, experiment
from pickopt.instance import GenSpec, generate
from pickopt.plotting import (
    plot_report, plot_series, plot_solution, plot_trajectory,
)


def _png_ok(path):
    data = path.read_bytes()
    return data[:8] == b"\x89PNG\r\n\x1a\n" and len(data) > 500


def test_plot_series_writes_png(tmp_path):
    points = [(1.0, 2.0, "a"), (2.0, 1.5, "a"), (1.0, 3.0, "b")]
    path = tmp_path / "series.png"
    plot_series(points, path, title="t", xlabel="x", ylabel="y")
    assert _png_ok(path)


def test_plot_trajectory_from_search_log(tmp_path):
    inst = generate(GenSpec(num_orderlines=15, return_fraction=0.2, seed=0))
    result = run(inst, AlnsConfig(outer_iters=2, inner_iters=5,
                                  num_contexts=2, seed=0))
    path = tmp_path / "trajectory.png"
    plot_trajectory(result.log, path)
    assert _png_ok(path)


def test_plot_report_one_figure_per_group(tmp_path):
    instances = [generate(GenSpec(num_orderlines=16, return_fraction=0.25,
                                  num_pickers=2, capacity=30.0, seed=s))
                 for s in range(1)]
    cfg = AlnsConfig(outer_iters=1, inner_iters=5, num_contexts=1, seed=0)
    report = experiment("splitup", instances, cfg, betas=[0.0, 1.0])
    written = plot_report(report, tmp_path, prefix="demo-")
    assert [p.name for p in written] == ["demo-splitup.png"]
    assert all(_png_ok(p) for p in written)


def test_plot_solution_schematic(tmp_path):
    inst = generate(GenSpec(num_orderlines=20, return_fraction=0.2,
                            num_pickers=2, seed=3))
    sol = bm2(inst, random.Random(0))
    path = tmp_path / "solution.png"
    plot_solution(sol, inst, path, title="demo")
    assert _png_ok(path)
