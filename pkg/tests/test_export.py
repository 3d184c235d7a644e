"""Unit tests for the `export` module."""

import numpy as np
import pandas as pd
import pytest

from blowup.exceptions import MissingInput
from blowup.export import (
    centers_table,
    frames_table,
    read_blowup_graph,
    read_csv,
    read_frames,
    read_json,
    read_trajectory,
    to_jsonable,
    write_blowup_graph,
    write_csv,
    write_json,
    write_trajectory,
)
from blowup.model import make_equation
from blowup.radial_solver import (
    Controls,
    RadialGrid,
    Status,
    blowup_graph,
    evolve,
    make_initial_data,
)
from blowup.similarity import WTrajectory, uniform_y_grid
from blowup.soliton_ode import CenterTrajectory
from blowup.solitons import soliton_frame


class TestJson:
    def test_to_jsonable(self) -> None:
        obj = dict(
            status=Status.COMPLETED,
            values=np.array([1.0, 2.0]),
            count=np.int64(3),
            flag=np.bool_(True),
            controls=Controls(t_end=1.0),
        )
        converted = to_jsonable(obj)
        assert converted["status"] == "Completed"
        assert converted["values"] == [1.0, 2.0]
        assert type(converted["count"]) is int
        assert converted["flag"] is True
        assert converted["controls"]["t_end"] == 1.0

    def test_sorted_and_newline_terminated(self, output_dir) -> None:
        path = write_json(dict(b=1, a=[0.1]), output_dir / "report.json")
        text = path.read_text()
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("}\n")
        assert read_json(path) == dict(a=[0.1], b=1)

    def test_missing(self, output_dir) -> None:
        with pytest.raises(MissingInput):
            read_json(output_dir / "missing.json")


class TestCsv:
    def test_floats_keep_full_precision(self, output_dir) -> None:
        table = pd.DataFrame(dict(x=[1 / 3, np.pi, 1e-300]))
        path = write_csv(table, output_dir / "table.csv")
        assert read_csv(path)["x"].tolist() == [1 / 3, np.pi, 1e-300]
        assert "\r" not in path.read_text()

    def test_missing(self, output_dir) -> None:
        with pytest.raises(MissingInput):
            read_csv(output_dir / "missing.csv")


class TestTrajectory:
    def test_written_trajectory_is_read_back(self, blowup_run, output_dir) -> None:
        write_trajectory(blowup_run, output_dir)
        trajectory = read_trajectory(output_dir)
        assert trajectory.status == Status.BLOWUP_DETECTED
        np.testing.assert_array_equal(trajectory.times, blowup_run.times)
        np.testing.assert_array_equal(trajectory.u, blowup_run.u)
        assert trajectory.grid == blowup_run.grid
        assert trajectory.spec.p == 3.0

    def test_dilated_equation(self, output_dir) -> None:
        spec = make_equation("klein_gordon", p=3.0)
        dilated = spec.rescaled(0.5)
        grid = RadialGrid(r_min=-6.0, r_max=6.0, n_points=61)
        initial_data = make_initial_data(grid, kind="gaussian", amplitude=1e-3)
        run = evolve(dilated, initial_data, grid, Controls(t_end=0.1))
        write_trajectory(run, output_dir, base_spec=spec)
        trajectory = read_trajectory(output_dir)
        assert trajectory.spec.scale == 0.5
        assert trajectory.spec.f(np.array([2.0]))[0] == pytest.approx(-0.5)

    def test_missing(self, output_dir) -> None:
        with pytest.raises(MissingInput):
            read_trajectory(output_dir)

    def test_blowup_graph(self, blowup_run, output_dir) -> None:
        graph = blowup_graph(blowup_run)
        path = write_blowup_graph(graph, output_dir / "blowup_graph.csv")
        assert list(pd.read_csv(path).columns) == ["r", "T", "fit_quality", "class"]
        read = read_blowup_graph(path)
        np.testing.assert_array_equal(read.T_estimates, graph.T_estimates)
        assert read.classification == graph.classification


class TestTables:
    def test_frames(self, output_dir) -> None:
        y = uniform_y_grid(21)
        frames = tuple(
            soliton_frame(3.0, theta1=1, zetas=[0.1 * s], y_grid=y, s=float(s))
            for s in range(3)
        )
        w_trajectory = WTrajectory(
            frames=frames, spec=make_equation("pure_power"), r0=0.0, T0=1.0
        )
        table = frames_table(w_trajectory)
        assert list(table.columns) == ["s", "y", "w", "ws", "wy"]
        assert len(table) == 63
        write_csv(table, output_dir / "frames.csv")
        write_json(dict(r0=0.0, T0=1.0), output_dir / "similarity.json")
        read = read_frames(output_dir)
        assert [frame.s for frame in read] == [0.0, 1.0, 2.0]
        np.testing.assert_array_equal(read[2].w, frames[2].w)

    def test_centers(self) -> None:
        trajectory = CenterTrajectory(
            s=np.array([1.0, 2.0]), zetas=np.array([[-1.0, 1.0], [-2.0, 3.0]])
        )
        table = centers_table(trajectory)
        assert list(table.columns) == ["s", "zeta_1", "zeta_2", "barycenter"]
        assert table["barycenter"].tolist() == [0.0, 0.5]
