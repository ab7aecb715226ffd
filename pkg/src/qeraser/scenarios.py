"""Scenario runner: wires states, gate, erasing and metrics together and
emits JSON reports plus CSV plot data."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import metrics as mt
from . import representations as rep
from . import tomography as tomo
from .config import ScenarioConfig, TomographyConfig, with_override
from .gaussian import (
    GaussianState,
    QuadratureSelector,
    loss_channel,
    make_rng,
    marginal,
    sample_quadratures,
    tensor,
)
from .qnd import apply_qnd, erase, erase_channel, erased_gate_channel, excess_noise

log = logging.getLogger(__name__)

Z_LIMIT = 5.0


@dataclass
class RunReport:
    scenario: str
    states: dict
    metrics: dict
    monte_carlo: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "states": self.states,
            "metrics": self.metrics,
            "monte_carlo": self.monte_carlo,
            "checks": self.checks,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _summary(state: GaussianState) -> dict:
    return {"mean": state.mean.tolist(), "cov": state.cov.tolist()}


# -- Monte Carlo -------------------------------------------------------------


def _moment_check(name: str, samples: np.ndarray, mean: float, var: float) -> dict:
    n = samples.size
    m_hat, v_hat = float(samples.mean()), float(samples.var(ddof=1))
    se_m = np.sqrt(var / n)
    se_v = var * np.sqrt(2.0 / (n - 1))
    return {
        "name": name,
        "n": n,
        "mean": m_hat,
        "mean_expected": mean,
        "z_mean": (m_hat - mean) / se_m,
        "variance": v_hat,
        "variance_expected": var,
        "z_variance": (v_hat - var) / se_v,
    }


def _sample_steps(steps: dict[str, GaussianState], shots: int, rng) -> list[dict]:
    out = []
    for label, st in steps.items():
        for mode in range(st.n_modes):
            for q, th in (("x", 0.0), ("p", np.pi / 2)):
                sel = QuadratureSelector(mode, th)
                m, v = marginal(st, sel)
                out.append(_moment_check(f"{label}.mode{mode}.{q}", sample_quadratures(st, sel, shots, rng), m, v))
    return out


def _single_shot_erase(b: GaussianState, gain: float, exchanged: bool, shots: int, rng) -> dict[str, np.ndarray]:
    """Run the measure-and-feedforward protocol shot by shot; each shot ends
    with one verifying homodyne sample of ``x`` (even shots) or ``p``."""
    xs, ps = [], []
    for k in range(shots):
        res = erase(b, gain, rng, exchanged)
        sel = QuadratureSelector(0, 0.0 if k % 2 == 0 else np.pi / 2)
        val = sample_quadratures(res.restored, sel, 1, rng)[0]
        (xs if k % 2 == 0 else ps).append(val)
    return {"x": np.array(xs), "p": np.array(ps)}


def _max_z(checks: list[dict]) -> float:
    return float(max(max(abs(c["z_mean"]), abs(c["z_variance"])) for c in checks)) if checks else 0.0


# -- main pipeline -----------------------------------------------------------


def _squeezed_axis(state: GaussianState) -> float:
    w, v = np.linalg.eigh(state.cov)
    vec = v[:, 0]
    return float(np.arctan2(vec[1], vec[0]) % np.pi)


def _protocol(cfg: ScenarioConfig, signal: Optional[GaussianState] = None):
    signal = cfg.signal.build() if signal is None else signal
    probe = cfg.probe.build()
    gate = cfg.gate.build()
    a = tensor(signal, probe)
    b = apply_qnd(gate, a)
    if cfg.loss < 1.0:
        b = loss_channel(loss_channel(b, 0, cfg.loss), 1, cfg.loss)
    c = erase_channel(b, cfg.feedforward_gain, gate.exchanged)
    return gate, a, b, c


def _model_metrics(cfg: ScenarioConfig, gate, a, b, c) -> dict:
    restored = 1 if gate.exchanged else 0
    other = 1 - restored
    ra, rb = a.reduced(restored), b.reduced(restored)
    m: dict = {}
    for label, st in (("a", a), ("b", b)):
        for mode, name in ((0, "S"), (1, "P")):
            m[f"var_x_{name}_{label}"] = float(st.cov[2 * mode, 2 * mode])
            m[f"var_p_{name}_{label}"] = float(st.cov[2 * mode + 1, 2 * mode + 1])
    m["var_x_restored_c"] = float(c.cov[0, 0])
    m["var_p_restored_c"] = float(c.cov[1, 1])
    m["restoration_error"] = float(max(np.max(np.abs(c.mean - ra.mean)), np.max(np.abs(c.cov - ra.cov))))

    if not gate.exchanged:
        dx_err2 = m["var_x_P_b"] - m["var_x_S_a"]
        dp_ba2 = m["var_p_S_b"] - m["var_p_S_a"]
        dp_res2 = m["var_p_restored_c"] - m["var_p_S_a"]
        m.update(dx_err2=dx_err2, dp_ba2=dp_ba2, dp_residual2=dp_res2)
        if dx_err2 > 0:
            m["fisher_information"] = mt.fisher_information_gaussian(dx_err2)
            m["residual_fisher_information"] = mt.residual_fisher_information(max(dp_res2, 0.0))
            ba = mt.uncertainty_product(np.sqrt(dx_err2), np.sqrt(max(dp_ba2, 0.0)), "back_action")
            res = mt.uncertainty_product(np.sqrt(dx_err2), np.sqrt(max(dp_res2, 0.0)), "residual")
            m.update(
                product_back_action=ba.product,
                back_action_bound_respected=ba.threshold_pass,
                product_residual=res.product,
                erasure_criterion_met=res.threshold_pass,
                decoherence_bound_delta1=rep.decoherence_bound(m["fisher_information"], 1.0),
            )

    axis = _squeezed_axis(ra)
    sel = QuadratureSelector(0, axis)
    m["squeezed_axis"] = axis
    m["squeezing_db_a"] = mt.variance_db(marginal(ra, sel)[1])
    m["squeezing_db_b"] = mt.variance_db(marginal(rb, sel)[1])
    m["squeezing_db_c"] = mt.variance_db(marginal(c, sel)[1])

    if abs(ra.purity() - 1.0) < 1e-6:
        m["fidelity_b_model"] = mt.fidelity(ra, rb)
        m["fidelity_c_model"] = mt.fidelity(ra, c)

    g_qnd, _ = gate.channel()
    m["transfer_gain_probe_to_signal_b"] = [float(g_qnd[2 * restored, 2 * other]), float(g_qnd[2 * restored + 1, 2 * other + 1])]
    t_er, _ = erased_gate_channel(gate, cfg.feedforward_gain)
    m["transfer_gain_probe_to_signal_c"] = [float(t_er[0, 2 * other]), float(t_er[1, 2 * other + 1])]
    sx, sp = excess_noise(gate, cfg.feedforward_gain)
    m["erased_channel"] = {
        "g_x": float(t_er[0, 2 * restored]),
        "g_p": float(t_er[1, 2 * restored + 1]),
        "sigma_x2": sx,
        "sigma_p2": sp,
    }

    g_opt, cv = mt.conditional_variance(b)
    ds = mt.duan_simon(b)
    m.update(
        conditional_variance=cv,
        conditional_variance_gain=g_opt,
        duan_simon_minus=ds.v_minus,
        duan_simon_plus=ds.v_plus,
        duan_simon_entangled=ds.entangled,
    )
    return m


def _channel_metrics(cfg: ScenarioConfig, reference: GaussianState) -> dict:
    m: dict = {}
    for step, ch_cfg in sorted(cfg.channels.items()):
        ch = ch_cfg.build()
        if reference.n_modes == 1 and abs(reference.purity() - 1.0) < 1e-6:
            m[f"fidelity_{step}"] = mt.fidelity(reference, ch.apply(reference))
        m[f"average_fidelity_{step}"] = mt.average_fidelity(ch, cfg.ensemble_variance, cfg.ensemble_per_quadrature)
        m[f"average_fidelity_{step}_quadrature"] = mt.average_fidelity_quadrature(
            ch, cfg.ensemble_variance, cfg.ensemble_per_quadrature
        )
        m[f"average_fidelity_{step}_total_variance"] = mt.average_fidelity(ch, cfg.ensemble_variance, False)
    return m


def _gain_estimation(cfg: ScenarioConfig, gate, rng) -> tuple[dict, list[dict]]:
    ax, ap = cfg.estimation_amplitudes
    shots = cfg.monte_carlo.shots
    runs, checks = [], []
    restored = 1 if gate.exchanged else 0
    for label, (x0, p0) in (("x", (ax, 0.0)), ("p", (0.0, ap)), ("vacuum", (0.0, 0.0))):
        sig = GaussianState([x0, p0], 0.25 * np.eye(2))
        _, a, b, c = _protocol(cfg, signal=sig)
        samples = _single_shot_erase(b, cfg.feedforward_gain, gate.exchanged, shots, rng)
        for q, idx in (("x", 0), ("p", 1)):
            checks.append(_moment_check(f"estimation.{label}.{q}", samples[q], float(c.mean[idx]), float(c.cov[idx, idx])))
        runs.append(
            mt.ProbeRun(
                (x0, p0),
                (float(samples["x"].mean()), float(samples["p"].mean())),
                (float(samples["x"].var(ddof=1)), float(samples["p"].var(ddof=1))),
                (float(a.cov[2 * restored, 2 * restored]), float(a.cov[2 * restored + 1, 2 * restored + 1])),
            )
        )
    est = mt.estimate_channel(runs)
    return {"g_x": est.g_x, "g_p": est.g_p, "sigma_x2": est.sigma_x2, "sigma_p2": est.sigma_p2}, checks


def _write_grids(cfg: ScenarioConfig, out: Path, steps: dict[str, GaussianState]) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    thetas = np.linspace(0, 2 * np.pi, cfg.output.phase_points, endpoint=False)
    with (out / "marginals.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "mode", "theta", "mean", "variance"])
        for label, st in steps.items():
            for mode in range(st.n_modes):
                for th in thetas:
                    m, v = marginal(st, QuadratureSelector(mode, th))
                    w.writerow([label, mode, f"{th:.10g}", f"{m:.12g}", f"{v:.12g}"])
    written.append("marginals.csv")
    for label, st in steps.items():
        for mode in range(st.n_modes):
            single = st.reduced(mode)
            axis = rep.default_axis(single, cfg.output.grid_points)
            rep.wigner(single, axis, axis).to_csv(out / f"wigner_{label}_mode{mode}.csv")
            written.append(f"wigner_{label}_mode{mode}.csv")
    # density-matrix cuts of the restored mode through (a), (b), (c)
    restored = steps["c"]
    wide = rep.default_axis(steps["b"].reduced(0), 2)
    finest = min(np.sqrt(steps[k].reduced(0).cov[0, 0]) if k != "c" else np.sqrt(restored.cov[0, 0]) for k in steps)
    points = max(cfg.output.grid_points, int(np.ceil((wide[-1] - wide[0]) / (finest / 4))) + 1)
    axis = np.linspace(wide[0], wide[-1], points)
    x0 = float(restored.mean[0])
    with (out / "dm_cuts.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "x", "diag", "abs_offdiag"])
        for label in ("a", "b", "c"):
            st = steps[label] if label == "c" else steps[label].reduced(0)
            dm = rep.position_density_matrix(st, axis)
            diag, anti = rep.dm_cuts(dm, x0)
            for x, d, o in zip(axis, diag.real, np.abs(anti)):
                w.writerow([label, f"{x:.10g}", f"{d:.12g}", "" if np.isnan(o) else f"{o:.12g}"])
    written.append("dm_cuts.csv")
    return written


def _checks(cfg_targets: dict, metrics: dict) -> dict:
    out = {}
    for key, (value, tol) in cfg_targets.items():
        got = metrics.get(key)
        out[key] = {
            "target": value,
            "tolerance": tol,
            "value": got,
            "pass": got is not None and abs(got - value) <= tol,
        }
    return out


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[Path] = None, targets: Optional[dict] = None) -> RunReport:
    """Prepare, interact, erase, evaluate; optionally write report and grids."""
    rng = make_rng(cfg.seed)
    gate, a, b, c = _protocol(cfg)
    restored = 1 if gate.exchanged else 0
    metrics = _model_metrics(cfg, gate, a, b, c)
    metrics.update(_channel_metrics(cfg, a.reduced(restored)))

    shots = cfg.monte_carlo.shots
    checks = _sample_steps({"a": a, "b": b, "c": c}, shots, rng)
    single = _single_shot_erase(b, cfg.feedforward_gain, gate.exchanged, min(shots, 4000), rng)
    checks.append(_moment_check("single_shot.c.x", single["x"], float(c.mean[0]), float(c.cov[0, 0])))
    checks.append(_moment_check("single_shot.c.p", single["p"], float(c.mean[1]), float(c.cov[1, 1])))
    if cfg.estimation_amplitudes is not None:
        est, est_checks = _gain_estimation(cfg, gate, rng)
        metrics["estimated_channel"] = est
        checks.extend(est_checks)
    mc = {"checks": checks, "max_abs_z": _max_z(checks), "within_limit": _max_z(checks) <= Z_LIMIT}

    report = RunReport(
        scenario=cfg.scenario,
        states={
            "a": _summary(a),
            "b": _summary(b),
            "c": _summary(c),
            "restored_mode": restored,
        },
        metrics=metrics,
        monte_carlo=mc,
        checks=_checks({**cfg.targets, **(targets or {})}, metrics),
        provenance={"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__},
    )
    out_dir = out_dir if out_dir is not None else (Path(cfg.output.dir) if cfg.output.dir else None)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = _write_grids(cfg, out_dir, {"a": a, "b": b, "c": c}) if cfg.output.grids else []
        report.provenance["files"] = files + ["report.json"]
        (out_dir / "report.json").write_text(report.to_json())
    return report


_SWEEP_COLUMNS = [
    "fisher_information",
    "dx_err2",
    "dp_ba2",
    "dp_residual2",
    "product_back_action",
    "product_residual",
    "decoherence_bound_delta1",
    "residual_fisher_information",
]


def run_sweep(cfg: ScenarioConfig, out_dir: Optional[Path] = None) -> list[RunReport]:
    """One report per sweep value; point ``i`` uses seed ``cfg.seed + i``."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    reports = []
    for i, value in enumerate(cfg.sweep.values):
        point = with_override(cfg, cfg.sweep.parameter, value)
        point = point.model_copy(update={"seed": cfg.seed + i, "sweep": None})
        reports.append(run_scenario(point))
    out_dir = out_dir if out_dir is not None else (Path(cfg.output.dir) if cfg.output.dir else None)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "sweep.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([cfg.sweep.parameter, *_SWEEP_COLUMNS, "sigma_x2", "sigma_p2"])
            for value, r in zip(cfg.sweep.values, reports):
                row = [value] + [r.metrics.get(k, "") for k in _SWEEP_COLUMNS]
                row += [r.metrics["erased_channel"]["sigma_x2"], r.metrics["erased_channel"]["sigma_p2"]]
                w.writerow(row)
        (out_dir / "sweep.json").write_text(json.dumps([_clean(r.to_dict()) for r in reports], indent=2, sort_keys=True))
    return reports


def run_tomography(cfg: ScenarioConfig, out_dir: Optional[Path] = None) -> RunReport:
    """Sample each target state, reconstruct with both estimators, score."""
    tcfg = cfg.tomography or TomographyConfig()
    rng = make_rng(cfg.seed)
    gate, a, b, c = _protocol(cfg)
    states = {
        "a_signal": a.reduced(0),
        "a_probe": a.reduced(1),
        "b_signal": b.reduced(0),
        "b_probe": b.reduced(1),
        "c": c,
    }
    per_phase = max(1, tcfg.samples // tcfg.phase_count)
    results, checks = {}, []
    out_dir = out_dir if out_dir is not None else (Path(cfg.output.dir) if cfg.output.dir else None)
    for target in tcfg.targets:
        truth = states[target.step]
        ds = tomo.scan_and_sample(truth, tcfg.phase_count, per_phase, rng)
        g_est = tomo.gaussian_mle(ds)
        m_err = (g_est.mean - truth.mean).tolist()
        v_err = [float(g_est.cov[0, 0] - truth.cov[0, 0]), float(g_est.cov[1, 1] - truth.cov[1, 1])]
        ml = tomo.fock_mle(ds, target.n_max, tcfg.iterations, tcfg.bins, target.span)
        truth_fock = tomo.gaussian_to_fock(truth, target.n_max)
        f_ml = tomo.fock_fidelity(ml.rho, truth_fock)
        fm, fc = ml.rho.moments()
        results[target.step] = {
            "samples": len(ds),
            "gaussian_mle": _summary(g_est),
            "gaussian_mle_mean_error": m_err,
            "gaussian_mle_variance_error": v_err,
            "fock_mle_fidelity": f_ml,
            "fock_mle_iterations": ml.iterations,
            "fock_mle_converged": ml.converged,
            "fock_mle_likelihood_monotone": bool(np.all(np.diff(ml.log_likelihoods) >= -1e-12)),
            "fock_mle_moments": {"mean": fm.tolist(), "cov": fc.tolist()},
            "truth": _summary(truth),
        }
        for q, idx in (("x", 0), ("p", 1)):
            sel = QuadratureSelector(0, 0.0 if q == "x" else np.pi / 2)
            samples = ds.outcomes[np.isclose(ds.thetas, sel.theta)]
            if samples.size > 1:
                m, v = marginal(truth, sel)
                checks.append(_moment_check(f"tomography.{target.step}.{q}", samples, m, v))
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            ds.to_csv(out / f"tomogram_{target.step}.csv")
            (out / f"fock_{target.step}.json").write_text(ml.rho.to_json())
            axis = rep.default_axis(truth, 41)
            w = tomo.fock_wigner(ml.rho, axis, axis)
            rep.QuadratureGrid((axis, axis), w, "wigner").to_csv(out / f"wigner_reconstructed_{target.step}.csv")
    report = RunReport(
        scenario=cfg.scenario,
        states={k: _summary(v) for k, v in states.items()},
        metrics={"tomography": results},
        monte_carlo={"checks": checks, "max_abs_z": _max_z(checks), "within_limit": _max_z(checks) <= Z_LIMIT},
        provenance={"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__},
    )
    if out_dir is not None:
        (Path(out_dir) / "tomography_report.json").write_text(report.to_json())
    return report
