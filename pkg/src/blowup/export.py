"""Reading and writing of run artifacts.

Tables are CSV files with fixed column orders and floats written with 17
significant digits, so that runs can be compared byte by byte. Structured reports
are JSON files.
"""

import json
import logging
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .exceptions import MissingInput
from .functionals import FunctionalReadout
from .local_energy import LocalEnergyReadout
from .model import EquationSpec, equation_from_config, equation_to_dict
from .radial_solver import (
    BlowupGraph,
    Controls,
    PointClass,
    RadialGrid,
    RadialTrajectory,
    Status,
)
from .similarity import SimilarityFrame, WTrajectory
from .soliton_ode import CenterTrajectory

logger = logging.getLogger(__package__)


FLOAT_FORMAT = "%.17g"


def to_jsonable(obj: Any) -> Any:
    """Convert dataclasses, enums and numpy values to plain JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(value) for value in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(table: pd.DataFrame, path: Path | str) -> Path:
    """Write a table with a fixed float format and Unix line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(table):,} rows to {path}")
    return path


def read_csv(path: Path | str) -> pd.DataFrame:
    """Read a table, raising MissingInput if it does not exist."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"The artifact {path} does not exist.")
    return pd.read_csv(path, float_precision="round_trip")


def write_json(obj: Any, path: Path | str) -> Path:
    """Write a report as indented JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        json.dump(to_jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def read_json(path: Path | str) -> Any:
    """Read a JSON report, raising MissingInput if it does not exist."""
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"The artifact {path} does not exist.")
    with path.open() as f:
        return json.load(f)


def trajectory_table(trajectory: RadialTrajectory) -> pd.DataFrame:
    """The trajectory in long format, columns `t,r,u,ut`."""
    n_times, n_points = trajectory.u.shape
    return pd.DataFrame(
        dict(
            t=np.repeat(trajectory.times, n_points),
            r=np.tile(trajectory.grid.r, n_times),
            u=trajectory.u.ravel(),
            ut=trajectory.ut.ravel(),
        )
    )


def write_trajectory(
    trajectory: RadialTrajectory,
    directory: Path | str,
    base_spec: EquationSpec | None = None,
) -> list[Path]:
    """Write `trajectory.csv` and its `trajectory.json` sidecar.

    Args:
        trajectory:
            The trajectory.
        directory:
            The output directory.
        base_spec:
            The undilated equation, for trajectories of a rescaled equation.

    Returns:
        The written paths.
    """
    directory = Path(directory)
    spec = base_spec or trajectory.spec
    metadata = dict(
        equation=equation_to_dict(spec),
        scale=trajectory.spec.scale,
        grid=asdict(trajectory.grid),
        controls=asdict(trajectory.controls),
        status=trajectory.status.value,
        n_times=int(trajectory.times.size),
    )
    return [
        write_csv(trajectory_table(trajectory), directory / "trajectory.csv"),
        write_json(metadata, directory / "trajectory.json"),
    ]


def read_trajectory(directory: Path | str) -> RadialTrajectory:
    """Read a trajectory written by `write_trajectory`.

    Raises:
        MissingInput:
            If an artifact is missing.
    """
    directory = Path(directory)
    metadata = read_json(directory / "trajectory.json")
    table = read_csv(directory / "trajectory.csv")
    grid = RadialGrid(**metadata["grid"])
    spec = equation_from_config(metadata["equation"])
    if metadata.get("scale", 1.0) != 1:
        spec = spec.rescaled(metadata["scale"])
    n_times = metadata["n_times"]
    u = table["u"].to_numpy().reshape(n_times, grid.n_points)
    ut = table["ut"].to_numpy().reshape(n_times, grid.n_points)
    return RadialTrajectory(
        grid=grid,
        spec=spec,
        times=table["t"].to_numpy()[:: grid.n_points].copy(),
        u=u,
        ut=ut,
        status=Status(metadata["status"]),
        amplitude_history=np.max(np.abs(u), axis=1),
        controls=Controls(**metadata["controls"]),
    )


def write_blowup_graph(graph: BlowupGraph, path: Path | str) -> Path:
    """Write the graph with columns `r,T,fit_quality,class`."""
    table = pd.DataFrame(
        dict(
            r=graph.r_samples,
            T=graph.T_estimates,
            fit_quality=graph.fit_quality,
            **{"class": [point_class.value for point_class in graph.classification]},
        )
    )
    return write_csv(table, path)


def read_blowup_graph(path: Path | str) -> BlowupGraph:
    """Read a graph written by `write_blowup_graph`."""
    table = read_csv(path)
    return BlowupGraph(
        r_samples=table["r"].to_numpy(),
        T_estimates=table["T"].to_numpy(),
        fit_quality=table["fit_quality"].to_numpy(),
        classification=tuple(PointClass(value) for value in table["class"]),
    )


def frames_table(w_trajectory: WTrajectory) -> pd.DataFrame:
    """The frames in long format, columns `s,y,w,ws,wy`."""
    return pd.concat(
        [
            pd.DataFrame(
                dict(
                    s=np.full(frame.y_grid.size, frame.s),
                    y=frame.y_grid,
                    w=frame.w,
                    ws=frame.ws,
                    wy=frame.wy,
                )
            )
            for frame in w_trajectory.frames
        ],
        ignore_index=True,
    )


def readouts_table(readouts: list[FunctionalReadout] | tuple) -> pd.DataFrame:
    """Functional readouts, columns `s,E0,I,J,E,H,dissipation`."""
    columns = ["s", "E0", "I", "J", "E", "H", "dissipation"]
    return pd.DataFrame([asdict(readout) for readout in readouts], columns=columns)


def centers_table(trajectory: CenterTrajectory) -> pd.DataFrame:
    """A center trajectory, columns `s,zeta_1,...,zeta_k,barycenter`."""
    table = pd.DataFrame(dict(s=trajectory.s))
    for index in range(trajectory.zetas.shape[1]):
        table[f"zeta_{index + 1}"] = trajectory.zetas[:, index]
    table["barycenter"] = trajectory.barycenters
    return table


def local_energy_table(readouts: list[LocalEnergyReadout] | tuple) -> pd.DataFrame:
    """Local energy readouts, columns `t,E_bar,boundary_cum,interior_cum`."""
    return pd.DataFrame(
        dict(
            t=[readout.t for readout in readouts],
            E_bar=[readout.E_bar for readout in readouts],
            boundary_cum=[readout.boundary_flux_integral for readout in readouts],
            interior_cum=[readout.interior_integral for readout in readouts],
        )
    )


def read_frames(directory: Path | str) -> list[SimilarityFrame]:
    """Read the frames written by a similarity run.

    The frames come from `frames.csv`, the scaling point from `similarity.json`.

    Raises:
        MissingInput:
            If an artifact is missing.
    """
    directory = Path(directory)
    metadata = read_json(directory / "similarity.json")
    table = read_csv(directory / "frames.csv")
    frames: list[SimilarityFrame] = []
    y_grid: NDArray[np.float64] | None = None
    for s, group in table.groupby("s", sort=True):
        if y_grid is None:
            y_grid = group["y"].to_numpy()
        frames.append(
            SimilarityFrame(
                r0=metadata["r0"],
                T0=metadata["T0"],
                s=float(s),
                y_grid=y_grid,
                w=group["w"].to_numpy(),
                ws=group["ws"].to_numpy(),
                wy=group["wy"].to_numpy(),
            )
        )
    return frames
