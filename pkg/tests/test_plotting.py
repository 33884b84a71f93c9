import re

from spduff.plotting import phase_times, plot_manifold, plot_oscillations, plot_phase


def labels(svg_text):
    return set(re.findall(r"<!-- (.*?) -->", svg_text))


def test_phase_times(mani0, mani1):
    assert [lab for lab, _ in phase_times(mani1)] == ["-0.5", "min", "0", "max", "0.5"]
    assert [lab for lab, _ in phase_times(mani0)] == ["0", "0.5"]


def test_manifold_figure(tmp_path, mani1, charts1):
    path = tmp_path / "m.svg"
    plot_manifold(mani1, charts1, path)
    text = path.read_text()
    assert {"t", "y", "u1", "u2", "u3", "K1", "K2", "K3"} <= labels(text)
    assert "<dc:date>" not in text


def test_phase_figure_is_deterministic(tmp_path, ctx1, mani1):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_phase(ctx1, mani1, mani1.t_min, a)
    plot_phase(ctx1, mani1, mani1.t_min, b)
    assert a.read_bytes() == b.read_bytes()
    assert {"f(y) - m(t)", "V(t, y)", "w", "y"} <= labels(a.read_text())


def test_oscillation_figure(tmp_path, sweeps, ctx1, mani1):
    reps = sweeps["D1"].for_epsilon(0.02)
    path = tmp_path / "o.svg"
    plot_oscillations(ctx1, mani1, reps, path)
    assert {"t", "y", "u2 (K2)"} <= labels(path.read_text())
