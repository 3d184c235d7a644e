"""Experiment pipelines, run manifests and replays.

Every experiment reads one composed configuration, writes its artifacts to
`<dirs.output>/<experiment>-seed<seed>` and records them in a `manifest.json`, which
`replay` uses to check that a run is reproducible.
"""

import contextlib
import logging
import platform
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Generator

import numpy as np
import pandas as pd
import scipy
from hydra import compose, initialize_config_dir
from hydra.core.global_hydra import GlobalHydra
from omegaconf import DictConfig, OmegaConf

from . import __version__
from .exceptions import BlowupError, ConfigError, Mismatch, MissingInput, StageError
from .export import (
    centers_table,
    frames_table,
    local_energy_table,
    read_blowup_graph,
    read_frames,
    read_json,
    read_trajectory,
    readouts_table,
    write_blowup_graph,
    write_csv,
    write_json,
    write_trajectory,
)
from .functionals import (
    E0,
    blowup_criterion,
    boundedness_check,
    clustered_y_grid,
    hardy_sobolev_sweep,
    monotonicity_report,
)
from .geometry import (
    characteristic_brackets,
    classify_point,
    cone_test,
    consistency_flags,
    corner_derivative_check,
    corner_fit,
    corner_graph,
    sign_rule,
    speed_bound_check,
)
from .local_energy import verify_energy_lemma
from .model import EquationSpec, equation_from_config
from .radial_solver import (
    Controls,
    PointClass,
    RadialGrid,
    RadialTrajectory,
    Status,
    blowup_graph,
    estimate_blowup_time,
    evolve,
    is_one_lipschitz,
    make_initial_data,
    ode_reference,
)
from .similarity import (
    SimilarityControls,
    WTrajectory,
    evolve_w,
    to_similarity,
    uniform_y_grid,
)
from .soliton_ode import (
    CenterSystem,
    PowerLawForcing,
    convergence_report,
    ensemble,
    explicit_residual,
    integrate_system,
    zeta_bar,
)
from .solitons import (
    decompose,
    decompose_frames,
    estimate_k_from_energy,
    fit_single,
    kappa,
    soliton_frame,
)
from .utils import canonical_json_bytes, disable_tqdm, make_rng, sha256_hex

logger = logging.getLogger(__package__)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"

EXPERIMENTS = (
    "simulate",
    "similarity",
    "diagnose",
    "decompose",
    "centers",
    "geometry",
    "energy",
)

REQUIRED_BLOCKS = dict(
    simulate=("grid", "controls", "initial_data", "blowup"),
    similarity=("grid", "controls", "initial_data", "blowup", "similarity"),
    diagnose=("blowup", "similarity", "functionals"),
    decompose=("solitons",),
    centers=("centers",),
    geometry=("blowup", "similarity", "geometry"),
    energy=("grid", "controls", "initial_data", "energy"),
)

# Keys whose values must be positive wherever they appear
POSITIVE_KEYS = ("tolerance", "cutoff", "threshold", "tolerance_fraction")


@dataclass(frozen=True)
class ReplayReport:
    """The outcome of a successful replay.

    Args:
        manifest_path:
            The replayed manifest.
        compared:
            The CSV artifacts that were compared.
        identical:
            Whether all of them were byte-identical, always True since differences
            raise.
    """

    manifest_path: Path
    compared: list[str]
    identical: bool


def config_from_flags(
    experiment: str,
    p: float | None = None,
    grid_n: int | None = None,
    cfl: float | None = None,
    cutoff: float | None = None,
    mu: float | None = None,
    c1: float | None = None,
    seed: int | None = None,
    out: str | None = None,
    overrides: tuple[str, ...] | list[str] = (),
) -> DictConfig:
    """Compose a configuration from command-line flags.

    Args:
        experiment:
            The experiment name.
        p:
            The power of the nonlinearity.
        grid_n:
            The number of radial grid points.
        cfl:
            The CFL fraction of the radial solver.
        cutoff:
            The cutoff ε of the similarity grid.
        mu:
            The constant μ of the Lyapunov functional.
        c1:
            The time scale of the center system.
        seed:
            The seed.
        out:
            The output root.
        overrides:
            Further Hydra overrides of the form `key=value`.

    Returns:
        The composed configuration.
    """
    flags = {
        "equation.p": p,
        "grid.n_points": grid_n,
        "controls.cfl": cfl,
        "similarity.cutoff": cutoff,
        "functionals.mu": mu,
        "centers.c1": c1,
        "seed": seed,
        "dirs.output": out,
    }
    override_list = [f"experiment={experiment}"]
    override_list += [
        f"{key}={value}" for key, value in flags.items() if value is not None
    ]
    override_list += list(overrides)

    if GlobalHydra.instance().is_initialized():
        return compose(config_name="config", overrides=override_list)
    with initialize_config_dir(config_dir=str(CONFIG_DIR), version_base=None):
        return compose(config_name="config", overrides=override_list)


def _check_positive(node: object, path: str) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            child = f"{path}.{key}" if path else str(key)
            positive = isinstance(value, (int, float)) and value > 0
            if any(str(key).endswith(name) for name in POSITIVE_KEYS) and (
                value is not None and not positive
            ):
                raise ConfigError(f"{child} must be positive, got {value!r}.")
            _check_positive(value, child)


def validate_config(cfg: DictConfig) -> None:
    """Check a configuration before running it.

    Raises:
        ConfigError:
            If the experiment is unknown, one of its blocks is missing, a tolerance
            is not positive or a CFL fraction is outside (0, 1].
    """
    if "experiment" not in cfg or "name" not in cfg.experiment:
        raise ConfigError("The configuration names no experiment.")
    name = cfg.experiment.name
    if name not in EXPERIMENTS:
        raise ConfigError(f"Unsupported experiment: {name!r}")
    for block in ("equation", "dirs", "seed", *REQUIRED_BLOCKS[name]):
        if block not in cfg or cfg[block] is None:
            raise ConfigError(f"The experiment {name!r} needs the block {block!r}.")
    if not isinstance(cfg.seed, int):
        raise ConfigError(f"The seed must be an integer, got {cfg.seed!r}.")

    _check_positive(OmegaConf.to_container(cfg, resolve=True), path="")
    for block in ("controls", "similarity"):
        if block in cfg and "cfl" in cfg[block]:
            cfl = cfg[block].cfl
            if not isinstance(cfl, (int, float)) or not 0 < cfl <= 1:
                raise ConfigError(f"{block}.cfl must be in (0, 1], got {cfl!r}.")


def run_directory(cfg: DictConfig) -> Path:
    """The output directory of a run."""
    return Path(cfg.dirs.output) / f"{cfg.experiment.name}-seed{cfg.seed}"


@contextlib.contextmanager
def _stage(name: str) -> Generator[None, None, None]:
    """Attach the pipeline stage to errors of the numerical modules."""
    try:
        yield
    except (StageError, MissingInput):
        raise
    except BlowupError as e:
        raise StageError(stage=name, message=str(e)) from e


def run_experiment(cfg: DictConfig) -> dict:
    """Run the experiment named in the configuration.

    Args:
        cfg:
            The configuration.

    Returns:
        The manifest of the run, also written to `manifest.json`.

    Raises:
        ConfigError:
            If the configuration is invalid.
        StageError:
            If a pipeline stage fails.
    """
    validate_config(cfg)
    name = cfg.experiment.name
    output_dir = run_directory(cfg)
    output_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Running the {name} experiment into {output_dir}")

    with _stage("equation"):
        spec = equation_from_config(cfg.equation)

    match name:
        case "simulate":
            outputs = _simulate(cfg=cfg, spec=spec, output_dir=output_dir)
        case "similarity":
            outputs = _similarity(cfg=cfg, spec=spec, output_dir=output_dir)
        case "diagnose":
            outputs = _diagnose(cfg=cfg, spec=spec, output_dir=output_dir)
        case "decompose":
            outputs = _decompose(cfg=cfg, spec=spec, output_dir=output_dir)
        case "centers":
            outputs = _centers(cfg=cfg, spec=spec, output_dir=output_dir)
        case "geometry":
            outputs = _geometry(cfg=cfg, spec=spec, output_dir=output_dir)
        case "energy":
            outputs = _energy(cfg=cfg, spec=spec, output_dir=output_dir)
        case _:
            raise ValueError(f"Unsupported experiment: {name!r}")

    config = OmegaConf.to_container(cfg, resolve=True)
    manifest = dict(
        experiment=name,
        seed=cfg.seed,
        config=config,
        inputs_sha256=sha256_hex(canonical_json_bytes(config)),
        versions=_versions(),
        outputs={path.name: sha256_hex(path.read_bytes()) for path in outputs},
    )
    write_json(manifest, output_dir / "manifest.json")
    logger.info(f"Wrote {len(outputs)} artifacts and the manifest to {output_dir}")
    return manifest


def replay(manifest_path: Path | str) -> ReplayReport:
    """Re-run a recorded experiment and compare its CSV artifacts byte by byte.

    Args:
        manifest_path:
            The path to a `manifest.json`.

    Returns:
        The report.

    Raises:
        MissingInput:
            If the manifest or one of its CSV artifacts is missing.
        Mismatch:
            If the configuration does not match its hash or an artifact differs.
    """
    manifest_path = Path(manifest_path)
    manifest = read_json(manifest_path)
    config = manifest["config"]
    if sha256_hex(canonical_json_bytes(config)) != manifest["inputs_sha256"]:
        raise Mismatch(
            file=manifest_path.name,
            row=None,
            detail="The configuration does not match its recorded hash.",
        )

    run_dir = manifest_path.parent
    names = sorted(name for name in manifest["outputs"] if name.endswith(".csv"))
    for name in names:
        if not (run_dir / name).exists():
            raise MissingInput(f"The artifact {run_dir / name} does not exist.")

    cfg = OmegaConf.create(config)
    with tempfile.TemporaryDirectory() as temp_dir, disable_tqdm():
        cfg.dirs.output = temp_dir
        run_experiment(cfg)
        replay_dir = run_directory(cfg)
        for name in names:
            _compare_csv(recorded=run_dir / name, replayed=replay_dir / name)

    logger.info(f"Replayed {manifest_path}: {len(names)} CSV artifacts identical.")
    return ReplayReport(manifest_path=manifest_path, compared=names, identical=True)


def _compare_csv(recorded: Path, replayed: Path) -> None:
    """Raise Mismatch at the first differing row, counting the header as row 0."""
    recorded_bytes, replayed_bytes = recorded.read_bytes(), replayed.read_bytes()
    if recorded_bytes == replayed_bytes:
        return
    recorded_lines = recorded_bytes.split(b"\n")
    replayed_lines = replayed_bytes.split(b"\n")
    for row, (old, new) in enumerate(zip(recorded_lines, replayed_lines)):
        if old != new:
            raise Mismatch(
                file=recorded.name,
                row=row,
                detail=f"row {row} differs: {old.decode()!r} != {new.decode()!r}",
            )
    row = min(len(recorded_lines), len(replayed_lines))
    raise Mismatch(
        file=recorded.name,
        row=row,
        detail=(
            f"{len(recorded_lines)} rows recorded but {len(replayed_lines)} replayed"
        ),
    )


def _versions() -> dict[str, str]:
    return dict(
        blowup=__version__,
        numpy=np.__version__,
        scipy=scipy.__version__,
        pandas=pd.__version__,
        python=platform.python_version(),
    )


def _grid(cfg: DictConfig) -> RadialGrid:
    return RadialGrid(
        r_min=float(cfg.grid.r_min),
        r_max=float(cfg.grid.r_max),
        n_points=int(cfg.grid.n_points),
    )


def _controls(cfg: DictConfig, **changes) -> Controls:
    values = OmegaConf.to_container(cfg.controls, resolve=True)
    assert isinstance(values, dict)
    values.update(changes)
    return Controls(**values)


def _source_trajectory(cfg: DictConfig, spec: EquationSpec) -> RadialTrajectory:
    """The trajectory of a previous run, or a fresh one from the configuration."""
    if cfg.get("source_run"):
        return read_trajectory(cfg.source_run)
    grid = _grid(cfg)
    with _stage("evolve"):
        initial_data = make_initial_data(grid=grid, **cfg.initial_data)
        return evolve(
            spec=spec, initial_data=initial_data, grid=grid, controls=_controls(cfg)
        )


def _s_values(cfg: DictConfig) -> np.ndarray:
    s_start, s_end = float(cfg.similarity.s_start), float(cfg.similarity.s_end)
    n_frames = int(round((s_end - s_start) / cfg.similarity.frame_interval)) + 1
    return np.linspace(s_start, s_end, n_frames)


def _transform(
    cfg: DictConfig, trajectory: RadialTrajectory, r0: float | None = None
) -> WTrajectory:
    """Similarity frames around the grid point nearest to r₀ and its blow-up time."""
    r = trajectory.grid.r
    r0 = float(cfg.similarity.r0) if r0 is None else r0
    index = int(np.argmin(np.abs(r - r0)))
    with _stage("blowup_time"):
        T0, quality = estimate_blowup_time(
            trajectory=trajectory, r_index=index, floor=cfg.blowup.floor
        )
    with _stage("to_similarity"):
        return to_similarity(
            trajectory=trajectory,
            r0=float(r[index]),
            T0=T0,
            s_values=_s_values(cfg),
            y_grid=uniform_y_grid(
                cfg.similarity.n_points, cutoff=cfg.similarity.cutoff
            ),
            fit_quality=quality,
        )


def _simulate(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Physical run, blow-up graph and the flat-data ODE reference."""
    grid = _grid(cfg)
    with _stage("evolve"):
        initial_data = make_initial_data(grid=grid, **cfg.initial_data)
        trajectory = evolve(
            spec=spec, initial_data=initial_data, grid=grid, controls=_controls(cfg)
        )
    outputs = write_trajectory(trajectory=trajectory, directory=output_dir)
    summary: dict = dict(
        status=trajectory.status,
        t_final=float(trajectory.times[-1]),
        max_amplitude=float(np.max(np.abs(trajectory.u[-1]))),
    )

    if trajectory.status == Status.BLOWUP_DETECTED:
        with _stage("blowup_graph"):
            graph = blowup_graph(trajectory=trajectory, floor=cfg.blowup.floor)
        outputs.append(write_blowup_graph(graph, output_dir / "blowup_graph.csv"))
        summary["one_lipschitz"] = is_one_lipschitz(
            graph=graph,
            tolerance=cfg.blowup.lipschitz_tolerance,
            min_quality=cfg.blowup.min_quality,
        )

    if cfg.initial_data.kind == "constant":
        with _stage("ode_reference"):
            reference = ode_reference(
                spec=spec,
                u0=float(cfg.initial_data.amplitude),
                u1=float(cfg.initial_data.velocity),
                t_end=float(cfg.blowup.ode_t_end),
                blowup_threshold=float(cfg.controls.blowup_threshold),
            )
        summary["ode_status"] = reference.status
        summary["ode_blowup_time"] = reference.blowup_time

    outputs.append(write_json(summary, output_dir / "simulate.json"))
    return outputs


def _similarity(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Similarity frames of a physical run and their single-soliton fits."""
    w_trajectory = _transform(cfg=cfg, trajectory=_source_trajectory(cfg, spec))
    fits = []
    with _stage("fit_single"):
        for frame in w_trajectory.frames:
            params, residual = fit_single(frame=frame, p=spec.p)
            fits.append(
                dict(s=frame.s, d=params.d, theta=params.theta, residual=residual)
            )

    metadata = dict(
        r0=w_trajectory.r0,
        T0=w_trajectory.T0,
        fit_quality=w_trajectory.metadata.get("fit_quality"),
        cutoff=float(cfg.similarity.cutoff),
        n_frames=len(w_trajectory.frames),
        final_fit=fits[-1],
    )
    return [
        write_csv(frames_table(w_trajectory), output_dir / "frames.csv"),
        write_csv(pd.DataFrame(fits), output_dir / "soliton_fits.csv"),
        write_json(metadata, output_dir / "similarity.json"),
    ]


def _diagnose_trajectory(cfg: DictConfig, spec: EquationSpec) -> WTrajectory:
    """Frames from a previous run, or an integration of the w-equation."""
    if cfg.get("source_run"):
        source = Path(cfg.source_run)
        if (source / "frames.csv").exists():
            metadata = read_json(source / "similarity.json")
            return WTrajectory(
                frames=tuple(read_frames(source)),
                spec=spec,
                r0=metadata["r0"],
                T0=metadata["T0"],
                metadata=dict(source=str(source)),
            )
        return _transform(cfg=cfg, trajectory=read_trajectory(source))

    y_grid = uniform_y_grid(cfg.similarity.n_points, cutoff=cfg.similarity.cutoff)
    w_init = np.asarray(kappa(spec.p, cfg.similarity.initial_d, y_grid))
    w_init = w_init - cfg.similarity.perturbation * (1 + 0.4 * y_grid**2)
    controls = SimilarityControls(
        cfl=cfg.similarity.cfl, frame_interval=cfg.similarity.frame_interval
    )
    with _stage("evolve_w"):
        return evolve_w(
            spec=spec,
            r0=float(cfg.similarity.r0),
            T0=float(cfg.similarity.T0),
            w_init=w_init,
            ws_init=np.zeros_like(y_grid),
            y_grid=y_grid,
            s_range=(float(cfg.similarity.s_start), float(cfg.similarity.s_end)),
            controls=controls,
        )


def _diagnose(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Lyapunov functional along a trajectory of frames, with its companion checks."""
    w_trajectory = _diagnose_trajectory(cfg=cfg, spec=spec)
    with _stage("monotonicity"):
        report = monotonicity_report(
            w_trajectory=w_trajectory,
            spec=spec,
            mu=cfg.functionals.mu,
            margin=cfg.functionals.margin,
        )
        criteria = [
            dict(s=readout.s, criterion=blowup_criterion(readout))
            for readout in report.readouts
            if readout.s >= cfg.functionals.window_start
        ]

    boundedness = None
    window = float(cfg.functionals.window)
    if report.s_values[-1] - report.s_values[0] >= 2 * window:
        boundedness = boundedness_check(readouts=report.readouts, window=window)

    with _stage("hardy_sobolev"):
        quadrature_grid = clustered_y_grid(
            cfg.functionals.quadrature_points, cutoff=cfg.functionals.quadrature_cutoff
        )
        hardy_sobolev_ratio = hardy_sobolev_sweep(
            p=spec.p,
            y_grid=quadrature_grid,
            n_functions=cfg.functionals.hardy_sobolev_functions,
            n_modes=cfg.functionals.n_modes,
            seed=cfg.seed,
        )

    summary = {
        key: value for key, value in asdict(report).items() if key != "readouts"
    }
    summary.update(
        criteria=criteria,
        boundedness=boundedness,
        hardy_sobolev_max_ratio=hardy_sobolev_ratio,
    )
    return [
        write_csv(readouts_table(report.readouts), output_dir / "readouts.csv"),
        write_json(summary, output_dir / "monotonicity.json"),
    ]


def _random_centers(
    rng: np.random.Generator, k: int, gap_min: float, gap_max: float
) -> np.ndarray:
    gaps = rng.uniform(gap_min, gap_max, k - 1)
    zetas = np.concatenate(([0.0], np.cumsum(gaps)))
    return zetas - zetas.mean()


def _decompose(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Soliton decomposition of a synthetic frame, or of a previous run's frames."""
    solitons = cfg.solitons
    if cfg.get("source_run"):
        frames = read_frames(cfg.source_run)
        with _stage("decompose"):
            decompositions = decompose_frames(
                frames=frames,
                p=spec.p,
                k_max=solitons.k_max,
                tolerance_fraction=solitons.tolerance_fraction,
            )
        table = pd.DataFrame(
            dict(
                s=[frame.s for frame in frames],
                k=[decomposition.k for decomposition in decompositions],
                theta1=[decomposition.theta1 for decomposition in decompositions],
                residual=[
                    decomposition.residual_hnorm for decomposition in decompositions
                ],
                converged=[decomposition.converged for decomposition in decompositions],
                k_energy=[decomposition.k_energy for decomposition in decompositions],
            )
        )
        return [
            write_csv(table, output_dir / "decompositions.csv"),
            write_json(decompositions[-1], output_dir / "decomposition.json"),
        ]

    if solitons.zetas is not None:
        true_zetas = np.asarray(list(solitons.zetas), dtype=float)
    else:
        true_zetas = _random_centers(
            rng=make_rng(cfg.seed),
            k=solitons.k,
            gap_min=solitons.gap_min,
            gap_max=solitons.gap_max,
        )
    y_grid = clustered_y_grid(
        solitons.n_points, cutoff=solitons.cutoff, kind=solitons.grid_kind
    )
    with _stage("decompose"):
        frame = soliton_frame(
            p=spec.p, theta1=solitons.theta1, zetas=true_zetas, y_grid=y_grid
        )
        decomposition = decompose(
            frame=frame,
            p=spec.p,
            k_max=solitons.k_max,
            tolerance_fraction=solitons.tolerance_fraction,
        )
        E0_value = E0(frame, spec.p)

    n_rows = max(true_zetas.size, decomposition.k)
    fitted = np.full(n_rows, np.nan)
    fitted[: decomposition.k] = decomposition.zetas
    truth = np.full(n_rows, np.nan)
    truth[: true_zetas.size] = true_zetas
    table = pd.DataFrame(
        dict(index=np.arange(1, n_rows + 1), zeta_true=truth, zeta_fit=fitted)
    )
    report = dict(
        k=decomposition.k,
        theta1=decomposition.theta1,
        zetas=decomposition.zetas,
        residual=decomposition.residual_hnorm,
        converged=decomposition.converged,
        k_energy=estimate_k_from_energy(E0_value, spec.p),
        E0=E0_value,
        true_theta1=solitons.theta1,
        true_zetas=true_zetas,
    )
    return [
        write_csv(table, output_dir / "decomposition.csv"),
        write_json(report, output_dir / "decomposition.json"),
    ]


def _centers(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Center system from a shifted explicit solution, plus a random ensemble."""
    centers = cfg.centers
    with _stage("centers"):
        system = CenterSystem(p=spec.p, k=centers.k, c1=centers.c1)
        forcing = None
        if centers.forcing_c != 0:
            forcing = PowerLawForcing(
                c=centers.forcing_c,
                exponent=centers.forcing_exponent,
                profile=centers.forcing_profile,
            )
        s_range = (float(centers.s_start), float(centers.s_end))
        start = zeta_bar(system, s_range[0]) + float(centers.shift)
        trajectory = integrate_system(
            system=system,
            zeta_init=start,
            s_range=s_range,
            forcing=forcing,
            n_samples=centers.n_samples,
        )
        report = convergence_report(trajectory=trajectory, system=system)
        reports = ensemble(
            system=system,
            n_runs=centers.n_runs,
            s_range=s_range,
            rng=make_rng(cfg.seed),
            spread=centers.spread,
            forcing=forcing,
        )

    deviations = pd.DataFrame(dict(s=trajectory.s, deviation=report.deviation_history))
    summary = dict(
        k=system.k,
        p=system.p,
        c1=system.c1,
        alpha_bar=system.alpha_bar,
        explicit_residual=explicit_residual(system, trajectory.s),
        shift=report.shift,
        max_deviation=report.max_deviation,
        barycenter_drift=report.barycenter_drift,
        ensemble_max_deviation=[
            ensemble_report.max_deviation for ensemble_report in reports
        ],
        ensemble_barycenter_drift=[
            ensemble_report.barycenter_drift for ensemble_report in reports
        ],
    )
    return [
        write_csv(centers_table(trajectory), output_dir / "centers.csv"),
        write_csv(deviations, output_dir / "deviations.csv"),
        write_json(summary, output_dir / "convergence.json"),
    ]


def _geometry(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Corner-shape fits on synthetic graphs, and point checks on a previous run."""
    geometry = cfg.geometry
    outputs, fits = [], []
    with _stage("corner_fit"):
        for k in geometry.k_values:
            graph = corner_graph(
                r0=geometry.r0,
                T0=geometry.T0,
                p=spec.p,
                k=k,
                amplitude=geometry.amplitude,
            )
            outputs.append(
                write_blowup_graph(graph, output_dir / f"corner_graph_k{k}.csv")
            )
            for side in ("left", "right"):
                fit = corner_fit(
                    graph=graph,
                    r0=geometry.r0,
                    p=spec.p,
                    k=k,
                    side=side,
                    min_decades=geometry.min_decades,
                    min_quality=geometry.min_quality,
                )
                deviation = corner_derivative_check(graph, fit, geometry.min_quality)
                fits.append(dict(fit=fit, derivative_deviation=deviation))
    report: dict = dict(corner_fits=fits)

    if cfg.get("source_run"):
        source = Path(cfg.source_run)
        trajectory = read_trajectory(source)
        graph = read_blowup_graph(source / "blowup_graph.csv")
        rows, classes, hints = [], [], []
        for r0 in geometry.points:
            index = int(np.argmin(np.abs(graph.r_samples - r0)))
            r_point = float(graph.r_samples[index])
            w_trajectory = _transform(cfg=cfg, trajectory=trajectory, r0=r_point)
            with _stage("classify"):
                point_class = classify_point(
                    [E0(frame, spec.p) for frame in w_trajectory.frames], spec.p
                )
                cone = cone_test(
                    graph=graph,
                    r0=r_point,
                    delta0=geometry.delta0,
                    min_quality=geometry.min_quality,
                )
                speed = speed_bound_check(
                    trajectory=trajectory,
                    r0=r_point,
                    T_r0=w_trajectory.T0,
                    p=spec.p,
                    k=2 if point_class == PointClass.CHARACTERISTIC_CANDIDATE else 1,
                    tau_max=geometry.tau_max,
                )
                hint = sign_rule(
                    trajectory=trajectory,
                    r_interval=(
                        r_point - geometry.sign_radius,
                        r_point + geometry.sign_radius,
                    ),
                )
            classes.append(point_class)
            hints.append(hint)
            rows.append(
                dict(
                    r=r_point,
                    T=w_trajectory.T0,
                    point_class=point_class.value,
                    cone=cone,
                    C4=speed.C4_fit,
                    sign_hint=hint.value if hint is not None else "",
                )
            )
        outputs.append(write_csv(pd.DataFrame(rows), output_dir / "points.csv"))
        report.update(
            brackets=characteristic_brackets(trajectory, graph, geometry.min_quality),
            inconsistent_points=consistency_flags(classes, hints),
        )

    outputs.append(write_json(report, output_dir / "geometry.json"))
    return outputs


def _energy(cfg: DictConfig, spec: EquationSpec, output_dir: Path) -> list[Path]:
    """Local energy inequality of the dilated solution for each dilation."""
    grid = _grid(cfg)
    outputs, lemmas = [], []
    for index, lam in enumerate(cfg.energy.lambdas):
        lam = float(lam)
        with _stage("evolve"):
            initial_data = make_initial_data(grid=grid, **cfg.initial_data)
            trajectory = evolve(
                spec=spec.rescaled(lam),
                initial_data=initial_data,
                grid=grid,
                controls=_controls(cfg, t_end=float(cfg.energy.t_end)),
            )
        with _stage("local_energy"):
            lemma = verify_energy_lemma(trajectory=trajectory, lam=lam, spec=spec)
        outputs.append(
            write_csv(
                local_energy_table(lemma.readouts),
                output_dir / f"local_energy_{index}.csv",
            )
        )
        lemmas.append(
            dict(
                lam=lam,
                fitted_C=lemma.fitted_C,
                violations=lemma.violations,
                additive_term=lemma.additive_term,
            )
        )
    outputs.append(write_json(dict(lemmas=lemmas), output_dir / "lemma.json"))
    return outputs
