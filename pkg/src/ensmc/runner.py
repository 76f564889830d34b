"""Build GP targets and kernels from a run configuration, run chains, summarize."""

import hashlib
import math
import time

import numpy as np

from . import config as C
from .diagnostics import ess, mode_switch_count
from .dists import DiagGaussian, GaussianStep
from .ensemble import ChainMeasure, ExchangeableMeasure, GridMeasure, IndependentMeasure
from .fastslow import FastSlowPoint
from .gpmodel import GpCholTarget, GpDirectTarget, GpEigTarget, GpHyperParams, GpModelSpec, read_dataset
from .rng import RngStream
from .samplers import Kernel, KernelConfig, run_chain
from .trace import column, rejection, write_trace

_KIND = {"joint-rwm": "joint-rwm", "single-rwm": "single-rwm", "extra-fast": "extra-fast",
         "random-grid": "random-grid", "ensemble-chol": "ensemble", "ensemble-eig": "ensemble"}


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def build_target(cfg, dataset=None, spec=None):
    spec = spec or GpModelSpec()
    data = dataset if dataset is not None else read_dataset(cfg["data"], center=cfg["center"])
    path = C.effective_path(cfg)
    if path == "chol":
        return GpCholTarget(spec, data)
    if path == "eig":
        return GpEigTarget(spec, data, cfg["eigensolver"])
    return GpDirectTarget(spec, data)


def _sd_for(name, cfg):
    if name.startswith("log_nu"):
        return cfg["nu_sd"]
    if name == "log_psi":
        return cfg["psi_sd"]
    return cfg["fast_sd"]


def _fast_prior(target):
    spec = target.spec
    stats = {"log_eta": spec.prior_log_eta, "log_sigma": spec.prior_log_sigma}
    mean = np.array([stats[n][0] for n in target.fast_names])
    sd = np.array([stats[n][1] for n in target.fast_names])
    return mean, sd


def build_measure(cfg, target):
    mean, sd = _fast_prior(target)
    K, variant = cfg["K"], cfg["measure"]
    if variant == "independent":
        return IndependentMeasure(DiagGaussian(mean, sd), K)
    if variant == "exchangeable":
        return ExchangeableMeasure(cfg["exch_spread"] * sd, K)
    if variant == "chain":
        return ChainMeasure(cfg["chain_step"] * sd, K)
    d = target.d_fast
    m = round(K ** (1.0 / d))
    if m**d != K or m < 2:
        raise C.ConfigError(f"a grid over {d} fast variables needs K = m^{d}; got K = {K}")
    jitter = None if cfg["grid_jitter"] == 1.0 else (1.0, cfg["grid_jitter"])
    return GridMeasure([m] * d, cfg["grid_extent"] * sd / (m - 1), jitter)


def build_kernel_config(cfg, target) -> KernelConfig:
    algo = cfg["algo"]
    kind = _KIND[algo]
    slow_sds = [_sd_for(n, cfg) for n in target.slow_names]
    fast_sds = [_sd_for(n, cfg) for n in target.fast_names]
    if algo == "joint-rwm":
        return KernelConfig(kind, s=cfg["s"])
    if algo in ("single-rwm", "extra-fast"):
        extra = cfg["extra"] if algo == "extra-fast" else 0
        if extra and target.d_fast == 0:
            raise C.ConfigError("extra-fast needs fast variables; use path chol or eig")
        return KernelConfig(kind, slow_sds=slow_sds, fast_sds=fast_sds, extra_fast_count=extra)
    if algo == "random-grid":
        return KernelConfig(kind, fast_sds=fast_sds, grid_drag_count=cfg["drag"], slow_step_sd=cfg["grid_slow_sd"])
    measure = build_measure(cfg, target)
    shift = None
    if cfg["shift_sd"] > 0:
        if not measure.shift_invariant:
            raise C.ConfigError("shifted fast proposals need a shift-invariant measure (not independent)")
        shift = GaussianStep([cfg["shift_sd"]] * target.d_fast)
    return KernelConfig(kind, slow_sds=slow_sds, measure=measure, fast_shift=shift, hold_sweeps=cfg["hold"])


def init_point(cfg, target) -> FastSlowPoint:
    spec = target.spec
    nu = spec.prior_log_nu[0] if cfg["init_log_nu"] is None else cfg["init_log_nu"]
    eta = spec.prior_log_eta[0] if cfg["init_log_eta"] is None else cfg["init_log_eta"]
    sig = spec.prior_log_sigma[0] if cfg["init_log_sigma"] is None else cfg["init_log_sigma"]
    return target.point_from_params(GpHyperParams(eta, sig, np.full(target.p, nu)))


def _nan_to_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def summarize_trace(records, cfg, data_sha256=None) -> dict:
    """Summary fields derived from a trace and its configuration only."""
    if not records:
        raise ValueError("empty trace")
    last = records[-1]
    ls = np.array(column(records, "log_sigma"))
    return {
        "config": dict(cfg),
        "data_sha256": data_sha256,
        "path": C.effective_path(cfg),
        "records": len(records),
        "iterations": last.iter,
        "slow_evals": last.slow_evals,
        "fast_evals": last.fast_evals,
        "rejection": {"slow": rejection(last.acc_slow), "fast": rejection(last.acc_fast)},
        "mode_switch_count": mode_switch_count(ls, cfg["mode_threshold"]),
        "ess_log_sigma": ess(ls) if len(ls) >= 10 and np.all(np.isfinite(ls)) else None,
        "final_log_post": _nan_to_none(last.log_post),
    }


def run_config(cfg, trace_path=None, timing=False, dataset=None):
    """Run one chain; returns ``(records, summary)`` and writes the trace if asked."""
    target = build_target(cfg, dataset)
    kernel = Kernel(build_kernel_config(cfg, target), target)
    rng = RngStream(cfg["seed"], cfg["stream"])
    t0 = time.perf_counter()
    run = run_chain(target, kernel, init_point(cfg, target), cfg["budget"], rng,
                    thin=cfg["thin"], records=None if cfg["thin"] else cfg["thin_records"])
    elapsed = time.perf_counter() - t0
    if trace_path is not None:
        write_trace(trace_path, run.trace)
    sha = file_sha256(cfg["data"]) if dataset is None else None
    summary = summarize_trace(run.trace, cfg, sha)
    summary["diagnostics"] = {
        "rejection_by_variable": run.stats.rejection_rates(),
        "eig_clamps": run.counters.eig_clamps,
        "slow_flops": run.counters.slow_flops,
        "fast_flops": run.counters.fast_flops,
    }
    if timing:
        summary["timing"] = {
            "wall_time": elapsed,
            "sec_per_iter": elapsed / run.iterations,
            "sec_per_slow_eval": elapsed / max(run.counters.slow_evals, 1),
        }
    return run.trace, summary
