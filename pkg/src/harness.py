"""
Monte Carlo evaluation of beam alignment schemes.
-------------------------------------------------

Classes:
    - Resources: Shared, read-only inputs of a simulation run.
    - TrialSetup: UE, channel and genie gain of one trial.
    - TrialRecord: Outcome of one scheme in one trial at one power.
    - MetricsRow: Aggregated metrics per scheme and power.
    - FlopsRow: Cost of one scheme.
    - CostBreakdown: Coarse and fine FLOPs of the proposed scheme.

Functions:
    - build_resources: Codebook, window length and network for a configuration.
    - setup_trial: Draw the UE of a trial.
    - run_trial: Run one scheme on one trial at one power.
    - nmse: Range and angle NMSE of a set of records.
    - scheme_names: Schemes runnable under a configuration.
    - success_rate: Share of records at least as good as the genie polar codeword.
    - coverage_rate: Share of records whose coarse subspace holds the true index.
    - achievable_rate: Rate discounted by pilot time.
    - fine_flops_blocks / fine_flops_approx: Fine-network cost in closed form.
    - measured_coarse_flops: Instrumented cost of one coarse pass.
    - cost_breakdown: Stage-by-stage cost of the proposed scheme.
    - flops_report: Cost and pilot table of every scheme.
    - aggregate: Metrics row from records.
    - monte_carlo: Full sweep over powers and schemes.
    - metrics_frame: Metrics rows as a DataFrame in CSV column order.
    - emit_csv: Write metrics rows as CSV.
    - load_metrics: Read a metrics CSV.
    - emit_plot: One SVG line chart per metric.
"""

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from baselines import (
    DFT_DNN_ANGLE_PARAMS,
    DFT_DNN_RANGE_PARAMS,
    DNBT_PARAMS,
    BeamDecision,
    aswje,
    flop_model,
    flops_coarse,
    genie_polar_best,
    ls_baseline,
    pilot_symbols,
    polar_exhaustive,
)
from channel import (
    PolarCodebook,
    UePosition,
    channel,
    complex_noise,
    measure,
    nearest_grid_index,
    polar_codebook,
    sample_ue,
    steering_vector,
)
from coarse import CoarseResult, coarse_align, default_gamma, max_window_length
from config import ConfigError, SimConfig
from finenet import (
    NetworkParams,
    NetworkSpec,
    argmax_angle,
    build_input,
    feature_lengths,
    init_params,
    network_flops,
    param_count,
    predict,
    refine_angle,
)
from utils import FlopCounter, dbm_to_mw, trial_rng, worker_count

CSV_COLUMNS = [
    "scheme",
    "p_t_dbm",
    "nmse_range",
    "nmse_angle",
    "mean_gain",
    "success_rate",
    "rate_bps_hz",
    "flops",
    "pilot_symbols",
    "trials",
    "seed",
    "coverage_rate",
    "nmse_angle_argmax",
]
PLOT_METRICS = {
    "nmse_range": "NMSE (range)",
    "nmse_angle": "NMSE (angle)",
    "mean_gain": "Normalized beam gain",
    "success_rate": "Success rate",
    "rate_bps_hz": "Normalized achievable rate (bit/s/Hz)",
}
LOG_METRICS = {"nmse_range", "nmse_angle"}
SUCCESS_SLACK = 1e-12
APPROX_TOLERANCE = 0.10
SVG_SALT = "nfa"


@dataclass(frozen=True)
class Resources:
    cfg: SimConfig
    codebook: PolarCodebook
    window: int
    fine: Optional[NetworkParams] = None


@dataclass(frozen=True)
class TrialSetup:
    trial: int
    ue: UePosition
    h: np.ndarray
    genie_gain: float


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one scheme in one trial at one power.

    The gain is recomputed by the harness from the returned beam.
    """

    scheme: str
    trial: int
    p_t_dbm: float
    theta_true: float
    r_true: float
    theta_est: Optional[float]
    r_est: Optional[float]
    gain: float
    response: float
    genie_gain: float
    success: bool
    pilot_symbols: int
    covered: Optional[bool] = None
    argmax_theta: Optional[float] = None
    diagnostic: Optional[str] = None


@dataclass(frozen=True)
class MetricsRow:
    scheme: str
    p_t_dbm: float
    nmse_range: Optional[float]
    nmse_angle: Optional[float]
    mean_gain: float
    success_rate: float
    rate_bps_hz: float
    flops: int
    pilot_symbols: int
    trials: int
    seed: int
    t_symbol_s: float = 1.04e-6
    coverage_rate: Optional[float] = None
    nmse_angle_argmax: Optional[float] = None

    @property
    def pilot_time_s(self) -> float:
        return self.pilot_symbols * self.t_symbol_s


@dataclass(frozen=True)
class FlopsRow:
    scheme: str
    flops: int
    pilot_symbols: int
    parameters: Optional[int]


@dataclass
class _SchemeInput:
    res: Resources
    setup: TrialSetup
    p_t_dbm: float
    p_t_mw: float
    sigma2_mw: float
    y: np.ndarray


@dataclass(frozen=True)
class _SchemeOutput:
    decision: BeamDecision
    covered: Optional[bool] = None
    argmax_theta: Optional[float] = None


def build_resources(cfg: SimConfig, fine: Optional[NetworkParams] = None) -> Resources:
    """Codebook, window length and network for a configuration.

    Raises:
        ConfigError: If the network does not match the window length.
    """
    window = max_window_length(cfg.array, cfg.epsilon)
    if fine is not None and fine.spec.window != window:
        raise ConfigError(f"Network input length {fine.spec.window} does not match window length {window}")
    return Resources(
        cfg=cfg,
        codebook=polar_codebook(cfg.array, cfg.polar_beta, cfg.polar_rings),
        window=window,
        fine=fine,
    )


def setup_trial(trial: int, res: Resources) -> TrialSetup:
    """Draw the UE of a trial; the same UE is used for every power and scheme."""
    cfg = res.cfg
    ue = sample_ue(cfg.array, cfg.phi_max, trial_rng(cfg.seed, trial, "ue"))
    h = channel(ue, cfg.array)
    return TrialSetup(trial=trial, ue=ue, h=h, genie_gain=genie_polar_best(h, res.codebook))


def _coarse(inp: _SchemeInput) -> CoarseResult:
    cfg = inp.res.cfg
    return coarse_align(
        inp.y,
        inp.p_t_mw,
        cfg.array,
        cfg.epsilon,
        default_gamma(inp.p_t_mw, cfg.gamma_exponent),
        sigma2_mw=inp.sigma2_mw,
    )


def _covered(coarse: CoarseResult, inp: _SchemeInput) -> bool:
    return nearest_grid_index(inp.setup.ue.theta, inp.res.cfg.n_antennas) in coarse.subspace


def _scheme_coarse(inp: _SchemeInput) -> _SchemeOutput:
    coarse = _coarse(inp)
    beam = steering_vector(coarse.angle_est, coarse.range_est, inp.res.cfg.array)
    decision = BeamDecision(beam, coarse.angle_est, coarse.range_est, "coarse", inp.res.cfg.n_antennas)
    return _SchemeOutput(decision=decision, covered=_covered(coarse, inp))


def _scheme_proposed(inp: _SchemeInput) -> _SchemeOutput:
    if inp.res.fine is None:
        raise ConfigError("The proposed scheme needs trained weights")
    coarse = _coarse(inp)
    sample = build_input(inp.y, coarse, inp.res.window)
    probs = predict(inp.res.fine, sample)
    theta = float(np.clip(refine_angle(probs, sample), -1.0, 1.0))
    beam = steering_vector(theta, coarse.range_est, inp.res.cfg.array)
    decision = BeamDecision(beam, theta, coarse.range_est, "proposed", inp.res.cfg.n_antennas)
    return _SchemeOutput(decision=decision, covered=_covered(coarse, inp), argmax_theta=argmax_angle(probs, sample))


def _scheme_ls(inp: _SchemeInput) -> _SchemeOutput:
    return _SchemeOutput(decision=ls_baseline(inp.y, inp.p_t_mw, inp.res.cfg.array))


def _scheme_polar_exh(inp: _SchemeInput) -> _SchemeOutput:
    rng = trial_rng(inp.res.cfg.seed, inp.setup.trial, f"polar@{inp.p_t_dbm}")
    return _SchemeOutput(decision=polar_exhaustive(inp.setup.h, inp.p_t_mw, inp.sigma2_mw, inp.res.codebook, rng))


def _scheme_aswje(inp: _SchemeInput) -> _SchemeOutput:
    cfg = inp.res.cfg
    return _SchemeOutput(decision=aswje(inp.y, cfg.array, cfg.aswje_kappa2, 1, cfg.aswje_step))


def _scheme_aswje_ka(inp: _SchemeInput) -> _SchemeOutput:
    cfg = inp.res.cfg
    rng = trial_rng(cfg.seed, inp.setup.trial, f"sound@{inp.p_t_dbm}")

    def sound_beam(beam: np.ndarray) -> complex:
        noise = complex_noise(rng, inp.sigma2_mw, 1)[0]
        return complex(math.sqrt(inp.p_t_mw) * np.vdot(beam, inp.setup.h) + noise)

    decision = aswje(inp.y, cfg.array, cfg.aswje_kappa2, cfg.aswje_ka, cfg.aswje_step, sound_beam=sound_beam)
    return _SchemeOutput(decision=decision)


SCHEMES: dict[str, Callable[[_SchemeInput], _SchemeOutput]] = {
    "proposed": _scheme_proposed,
    "coarse": _scheme_coarse,
    "ls": _scheme_ls,
    "polar_exh": _scheme_polar_exh,
    "aswje": _scheme_aswje,
}


def scheme_names(cfg: SimConfig) -> list[str]:
    """Schemes runnable under a configuration; the multi-candidate ASW-JE name follows aswje_ka."""
    return [*SCHEMES, cfg.aswje_multi_scheme]


def _handler(scheme: str, cfg: SimConfig) -> Callable[[_SchemeInput], _SchemeOutput]:
    if scheme == cfg.aswje_multi_scheme:
        return _scheme_aswje_ka
    return SCHEMES[scheme]


def run_trial(scheme: str, setup: TrialSetup, p_t_dbm: float, res: Resources) -> TrialRecord:
    """Run one scheme on one trial at one power.

    Every scheme sees the same DFT measurements for a given trial and power.
    A scheme that raises is recorded with zero gain and the error text.

    Args:
        scheme (str): Registered scheme name.
        setup (TrialSetup): The trial's UE and channel.
        p_t_dbm (float): Transmit power in dBm.
        res (Resources): Shared inputs.

    Returns:
        TrialRecord: Outcome with the gain recomputed from the beam.

    Raises:
        KeyError: For an unregistered scheme.
    """
    cfg = res.cfg
    handler = _handler(scheme, cfg)
    p_t_mw = dbm_to_mw(p_t_dbm)
    sigma2 = cfg.array.noise_power_mw
    y = measure(setup.h, p_t_mw, sigma2, trial_rng(cfg.seed, setup.trial, f"dft@{p_t_dbm}"))
    inp = _SchemeInput(res=res, setup=setup, p_t_dbm=p_t_dbm, p_t_mw=p_t_mw, sigma2_mw=sigma2, y=y)
    h_norm = float(np.linalg.norm(setup.h))
    common = {
        "scheme": scheme,
        "trial": setup.trial,
        "p_t_dbm": p_t_dbm,
        "theta_true": setup.ue.theta,
        "r_true": setup.ue.r,
        "genie_gain": setup.genie_gain,
    }
    try:
        out = handler(inp)
    except Exception as exc:
        return TrialRecord(
            **common,
            theta_est=None,
            r_est=None,
            gain=0.0,
            response=0.0,
            success=False,
            pilot_symbols=pilot_symbols(scheme, cfg),
            diagnostic=f"{type(exc).__name__}: {exc}",
        )
    beam = out.decision.beam
    response = float(abs(np.vdot(beam, setup.h)) / np.linalg.norm(beam))
    gain = response / h_norm
    return TrialRecord(
        **common,
        theta_est=out.decision.theta_est,
        r_est=out.decision.r_est,
        gain=gain,
        response=response,
        success=gain >= setup.genie_gain * (1 - SUCCESS_SLACK),
        pilot_symbols=out.decision.pilot_symbols,
        covered=out.covered,
        argmax_theta=out.argmax_theta,
    )


def nmse(records: list[TrialRecord]) -> tuple[Optional[float], Optional[float]]:
    """E|r₀ − r̂|²/E|r₀|² and E|θ₀ − θ̂|²/E|θ₀|² over records with estimates.

    Returns None for a quantity no record estimates.
    """
    ranged = [(rec.r_true, rec.r_est) for rec in records if rec.r_est is not None]
    angled = [(rec.theta_true, rec.theta_est) for rec in records if rec.theta_est is not None]
    return _normalized_error(ranged), _normalized_error(angled)


def _normalized_error(pairs: list[tuple[float, float]]) -> Optional[float]:
    if not pairs:
        return None
    truth, est = np.array(pairs, dtype=float).T
    denom = float(np.mean(truth**2))
    return float(np.mean((truth - est) ** 2)) / denom if denom > 0 else None


def success_rate(records: list[TrialRecord]) -> float:
    if not records:
        return 0.0
    return sum(rec.success for rec in records) / len(records)


def coverage_rate(records: list[TrialRecord]) -> Optional[float]:
    """Share of records whose coarse subspace holds the true DFT index; None without a coarse stage."""
    flags = [rec.covered for rec in records if rec.covered is not None]
    return sum(flags) / len(flags) if flags else None


def achievable_rate(record: TrialRecord, cfg: SimConfig) -> float:
    """(1 − T_ba/T_total)·log₂(1 + Pₜ|wᴴh|/σ²) with T_ba = ⌈pilots/n_rf⌉·T_symbol."""
    t_ba = math.ceil(record.pilot_symbols / cfg.n_rf) * cfg.t_symbol_us * 1e-6
    t_total = cfg.t_total_ms * 1e-3
    share = max(0.0, 1.0 - t_ba / t_total)
    snr = dbm_to_mw(record.p_t_dbm) * record.response / cfg.array.noise_power_mw
    return share * math.log2(1.0 + snr)


def fine_flops_blocks(window: int) -> int:
    """Fine-network cost from the per-block constants of the default architecture."""
    l1, l2, l3 = feature_lengths(window)
    return 224 * l1 + 16320 * l2 + 65408 * l3 + 155 * l3 + 128 * l3 + 32640 + 32640 + 255 * window


def fine_flops_approx(window: int) -> int:
    """Collapsed approximation 12658U + 65280."""
    return 12658 * window + 65280


@dataclass(frozen=True)
class CostBreakdown:
    """FLOPs of the proposed scheme stage by stage.

    Attributes:
        window: Fine-stage input length U.
        coarse: Closed form 17N + 7.
        coarse_measured: Instrumented count of one coarse pass at the widest window.
        fine_layers: Sum of the per-layer network costs.
        fine_blocks: Per-block constant sum of the default architecture.
        fine_approx: Collapsed approximation 12658U + 65280.
    """

    window: int
    coarse: int
    coarse_measured: int
    fine_layers: int
    fine_blocks: int
    fine_approx: int

    @property
    def total(self) -> int:
        return self.coarse + self.fine_layers

    @property
    def approx_gap(self) -> float:
        """Relative distance of the collapsed approximation from the block sum."""
        return abs(self.fine_approx - self.fine_blocks) / self.fine_blocks

    @property
    def approx_agrees(self) -> bool:
        return self.approx_gap <= APPROX_TOLERANCE


def measured_coarse_flops(cfg: SimConfig) -> int:
    """Instrumented coarse cost for a noiseless broadside UE at r_min, where windows are widest."""
    array = cfg.array
    y = measure(channel(UePosition.from_theta(0.0, array.r_min), array), 1.0, 0.0, np.random.default_rng(0))
    counter = FlopCounter()
    coarse_align(y, 1.0, array, cfg.epsilon, sigma2_mw=0.0, counter=counter)
    return counter.total


def cost_breakdown(cfg: SimConfig, fine: Optional[NetworkParams] = None) -> CostBreakdown:
    """Coarse and fine FLOPs of the proposed scheme under a configuration."""
    window = fine.spec.window if fine is not None else max_window_length(cfg.array, cfg.epsilon)
    spec = fine.spec if fine is not None else NetworkSpec(window=window)
    return CostBreakdown(
        window=window,
        coarse=flops_coarse(cfg.n_antennas),
        coarse_measured=measured_coarse_flops(cfg),
        fine_layers=sum(network_flops(spec).values()),
        fine_blocks=fine_flops_blocks(window),
        fine_approx=fine_flops_approx(window),
    )


def _scheme_flops(scheme: str, cfg: SimConfig, window: int) -> int:
    if scheme == "proposed":
        return flops_coarse(cfg.n_antennas) + sum(network_flops(NetworkSpec(window=window)).values())
    return flop_model(scheme, cfg)


def flops_report(cfg: SimConfig, fine: Optional[NetworkParams] = None) -> list[FlopsRow]:
    """Cost, pilot symbols and trainable parameters of every scheme."""
    window = max_window_length(cfg.array, cfg.epsilon)
    network = fine.spec if fine is not None else NetworkSpec(window=window)
    proposed_params = param_count(fine) if fine is not None else _default_param_count(network)
    parameters: dict[str, Optional[int]] = {
        "proposed": proposed_params,
        "dft_dnn": DFT_DNN_RANGE_PARAMS + DFT_DNN_ANGLE_PARAMS,
        "dnbt": DNBT_PARAMS,
    }
    schemes = ["proposed", "coarse", "ls", "polar_exh", "aswje", cfg.aswje_multi_scheme, "dft_dnn", "dnbt"]
    return [
        FlopsRow(
            scheme=s,
            flops=_scheme_flops(s, cfg, network.window),
            pilot_symbols=math.ceil(pilot_symbols(s, cfg) / cfg.n_rf),
            parameters=parameters.get(s),
        )
        for s in schemes
    ]


def _default_param_count(spec: NetworkSpec) -> int:
    return param_count(init_params(spec, np.random.default_rng(0)))


def aggregate(records: list[TrialRecord], cfg: SimConfig, flops: int) -> MetricsRow:
    """Metrics row for the records of one scheme at one power."""
    first = records[0]
    nmse_range, nmse_angle = nmse(records)
    return MetricsRow(
        scheme=first.scheme,
        p_t_dbm=first.p_t_dbm,
        nmse_range=nmse_range,
        nmse_angle=nmse_angle,
        mean_gain=float(np.mean([rec.gain for rec in records])),
        success_rate=success_rate(records),
        rate_bps_hz=float(np.mean([achievable_rate(rec, cfg) for rec in records])),
        flops=flops,
        pilot_symbols=math.ceil(first.pilot_symbols / cfg.n_rf),
        trials=len(records),
        seed=cfg.seed,
        t_symbol_s=cfg.t_symbol_us * 1e-6,
        coverage_rate=coverage_rate(records),
        nmse_angle_argmax=_normalized_error(
            [(rec.theta_true, rec.argmax_theta) for rec in records if rec.argmax_theta is not None]
        ),
    )


def _run_trial_all(trial: int, res: Resources) -> list[TrialRecord]:
    setup = setup_trial(trial, res)
    return [run_trial(s, setup, p, res) for p in res.cfg.p_t_dbm for s in res.cfg.schemes]


def monte_carlo(
    cfg: SimConfig,
    fine: Optional[NetworkParams] = None,
    on_trial: Optional[Callable[[int], None]] = None,
) -> list[MetricsRow]:
    """Run every scheme at every power over cfg.trials trials.

    Trials are spread over worker threads; records are gathered in trial order,
    so the result does not depend on the worker count.

    Raises:
        ConfigError: For an unknown scheme or a missing network.
    """
    known = scheme_names(cfg)
    unknown = [s for s in cfg.schemes if s not in known]
    if unknown:
        raise ConfigError(f"Unknown schemes: {', '.join(unknown)}; choose from {', '.join(known)}")
    if "proposed" in cfg.schemes and fine is None:
        raise ConfigError("The proposed scheme needs trained weights (set weights_path)")
    if not cfg.p_t_dbm:
        return []

    res = build_resources(cfg, fine)
    per_trial: list[list[TrialRecord]] = []
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for records in pool.map(lambda t: _run_trial_all(t, res), range(cfg.trials)):
            per_trial.append(records)
            if on_trial is not None:
                on_trial(len(per_trial))

    # Each trial lists its records power-major, scheme-minor.
    n_schemes = len(cfg.schemes)
    rows = []
    for pi, _ in enumerate(cfg.p_t_dbm):
        for si, s in enumerate(cfg.schemes):
            group = [records[pi * n_schemes + si] for records in per_trial]
            rows.append(aggregate(group, cfg, _scheme_flops(s, cfg, res.window)))
    return rows


def metrics_frame(rows: list[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([{col: getattr(row, col) for col in CSV_COLUMNS} for row in rows], columns=CSV_COLUMNS)


def emit_csv(rows: list[MetricsRow], path: Path) -> None:
    """Write metrics rows; an empty list gives a header-only file."""
    frame = metrics_frame(rows)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def load_metrics(path: Path) -> pd.DataFrame:
    """Read a metrics CSV written by emit_csv.

    Raises:
        ConfigError: If the file is missing or lacks metric columns.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigError(f"Could not read metrics file {path}: {exc}") from exc
    missing = [col for col in CSV_COLUMNS if col not in frame.columns]
    if missing:
        raise ConfigError(f"Metrics file {path} lacks columns: {', '.join(missing)}")
    return frame


def emit_plot(frame: pd.DataFrame, out_dir: Path) -> list[Path]:
    """Write one SVG line chart per metric, one line per scheme.

    Returns:
        list[Path]: Written files, in metric order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        for metric, label in PLOT_METRICS.items():
            fig = Figure(figsize=(6.4, 4.8))
            ax = fig.subplots()
            for scheme, group in frame.groupby("scheme", sort=True):
                data = group.dropna(subset=[metric]).sort_values("p_t_dbm")
                if data.empty:
                    continue
                ax.plot(data["p_t_dbm"].astype(float), data[metric].astype(float), marker="o", label=str(scheme))
            if metric in LOG_METRICS and (frame[metric].dropna() > 0).any():
                ax.set_yscale("log")
            ax.set_xlabel("Transmit power (dBm)")
            ax.set_ylabel(label)
            ax.grid(True, which="both", alpha=0.3)
            if ax.get_legend_handles_labels()[0]:
                ax.legend()
            target = out_dir / f"{metric}.svg"
            fig.savefig(target, format="svg", metadata={"Date": None})
            written.append(target)
    return written
