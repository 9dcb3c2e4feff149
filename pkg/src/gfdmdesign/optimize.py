"""Filter and window design by projected gradient methods.

Every filter design lives on the sphere ``sum |gamma|^2 = M``; complex
coefficients are treated as ``4M`` real variables, and gradients are carried
as complex arrays ``G`` with ``d/dRe = G.real`` and ``d/dIm = G.imag``. Each
step moves along the negative tangential gradient, renormalizes, and is
accepted by a backtracking Armijo test, so the objective never increases
within a stage.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, List, Optional

import numpy as np

from .cfo import CfoRateObjective, draw_cfo_set, screen_draws
from .channels import ChannelSpec
from .errors import ConfigurationError, DegenerateInputError, DomainError, InfeasibleError
from .model import FilterSpec, GfdmConfig, build_filter_dirichlet, build_filter_rrc, _check_match
from .rates import Snr, _snr, subchannel_gains
from .spectrum import StopbandModel, WindowSpec


@dataclass(frozen=True)
class OptOptions:
    max_iters: int = 300
    tol: float = 1e-9
    step0: float = 0.05  # first trial move, relative to the filter norm
    step_max: float = 0.5
    armijo: float = 1e-4
    restarts: int = 8
    seed: int = 0
    p_schedule: tuple = (8, 16, 32, 64)
    density: int = 8
    span: float = 2.0
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    penalty_rounds: int = 4
    n_mc: int = 200
    min_iters: int = 10
    fd_step: float = 1e-6

    def __post_init__(self):
        for name in ("max_iters", "restarts", "density", "penalty_rounds", "n_mc"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("step0", "step_max", "armijo", "span", "penalty0", "penalty_growth", "fd_step"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.tol < 1:
            raise ConfigurationError("tol must lie in (0, 1)")
        if self.min_iters < 0 or self.seed < 0:
            raise ConfigurationError("min_iters and seed must be nonnegative")
        if not self.p_schedule or any(p < 1 for p in self.p_schedule):
            raise ConfigurationError("p_schedule needs entries >= 1")
        object.__setattr__(self, "p_schedule", tuple(self.p_schedule))

    @classmethod
    def from_dict(cls, d: dict) -> "OptOptions":
        return cls(**d)


@dataclass
class OptResult:
    filter: FilterSpec
    objective: float
    objective_trace: List[float]
    trace_stage: List[int]
    converged: bool
    best_restart: int = 0
    window: Optional[WindowSpec] = None
    constraint_residuals: List[float] = field(default_factory=list)
    baselines: dict = field(default_factory=dict)
    seed: int = 0
    problem: str = ""
    info: dict = field(default_factory=dict)

    def improvement_db(self, baseline: str) -> float:
        """Reduction of the objective relative to a named baseline, in dB."""
        return 10.0 * math.log10(self.baselines[baseline] / self.objective)

    def to_dict(self) -> dict:
        d = {
            "problem": self.problem,
            "seed": self.seed,
            "objective": self.objective,
            "converged": self.converged,
            "best_restart": self.best_restart,
            "filter": self.filter.to_dict(),
            "window": self.window.to_dict() if self.window is not None else None,
            "objective_trace": list(map(float, self.objective_trace)),
            "trace_stage": list(map(int, self.trace_stage)),
            "constraint_residuals": list(map(float, self.constraint_residuals)),
            "baselines": {k: float(v) for k, v in self.baselines.items()},
            "info": self.info,
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def project_power(gamma) -> FilterSpec:
    """Scale ``gamma`` onto the power sphere ``sum |gamma|^2 = M``."""
    g = np.asarray(gamma, dtype=complex).ravel()
    if g.size < 2 or g.size % 2:
        raise DegenerateInputError(f"filter length must be even and >= 2, got {g.size}")
    nrm2 = float(np.sum(np.abs(g) ** 2))
    if not nrm2 > 0 or not np.isfinite(nrm2):
        raise DegenerateInputError("cannot normalize a zero filter")
    return FilterSpec(g * math.sqrt((g.size // 2) / nrm2))


def _sphere(g):
    return project_power(g).gamma


# ---------------------------------------------------------------------------
# generic descent


@dataclass
class _Trace:
    values: List[float] = field(default_factory=list)
    stages: List[int] = field(default_factory=list)

    def add(self, v, stage):
        self.values.append(float(v))
        self.stages.append(stage)


def _descend(value: Callable, value_grad: Callable, x0, retract: Callable, tangent: Callable,
             scale: float, opts: OptOptions, trace: Optional[_Trace] = None, stage: int = 0,
             max_iters: Optional[int] = None):
    """Backtracking projected gradient descent.

    ``retract`` maps a trial point back to the feasible set and ``tangent``
    removes the gradient component that the retraction would undo.
    Returns ``(x, f, converged)``.
    """
    x = retract(x0)
    f, g = value_grad(x)
    if not np.isfinite(f):
        return x, f, False
    if trace is not None:
        trace.add(f, stage)
    alpha = opts.step0
    for _ in range(max_iters or opts.max_iters):
        d = tangent(x, g)
        dn = float(np.linalg.norm(d))
        if dn == 0.0 or not np.isfinite(dn):
            return x, f, True
        step_dir = d / dn * scale
        while True:
            xn = retract(x - alpha * step_dir)
            fn = value(xn)
            decrease = float(np.real(np.vdot(g, x - xn)))
            if np.isfinite(fn) and fn <= f - opts.armijo * max(decrease, 0.0) and fn <= f:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                return x, f, True
        rel = (f - fn) / max(abs(f), 1e-300)
        x = xn
        f, g = value_grad(x)
        if trace is not None:
            trace.add(f, stage)
        alpha = min(2.0 * alpha, opts.step_max)
        if rel < opts.tol:
            return x, f, True
    return x, f, False


def _sphere_tangent(x, g):
    return g - (np.real(np.vdot(x, g)) / np.real(np.vdot(x, x))) * x


def _restart_rngs(opts: OptOptions, n: Optional[int] = None):
    ss = np.random.SeedSequence(opts.seed)
    return [np.random.default_rng(s) for s in ss.spawn(n or opts.restarts)]


def _random_filter(rng, M):
    return _sphere(rng.standard_normal(2 * M) + 1j * rng.standard_normal(2 * M))


# ---------------------------------------------------------------------------
# rate maximization in AWGN


def noise_cost(gamma, K: int, delta: float = 0.0):
    """``mean 1/(|gamma_q + d_l gamma_{M+q}|^2 + delta)`` and its gradient.

    ``delta = 0`` is the ZF noise enhancement, ``delta = 1/snr`` the MMSE
    denominator.
    """
    g = np.asarray(gamma, complex)
    M = g.size // 2
    filt = FilterSpec(g)
    z = subchannel_gains(filt, K)
    den = np.abs(z) ** 2 + delta
    if np.min(den) <= 0:
        return math.inf, np.zeros_like(g)
    J = float(np.mean(1.0 / den))
    hz = -z / den ** 2 / z.size  # d J / d conj(z)
    d = np.exp(2j * np.pi * np.arange(K) / K)
    h = np.concatenate([hz.sum(axis=0), (np.conj(d)[:, None] * hz).sum(axis=0)])
    return J, 2.0 * h


def _awgn_rate_from_cost(config, snr, J, receiver):
    if receiver == "ZF":
        return config.N * math.log2(1.0 + snr / J)
    return config.N * math.log2(snr / J) if snr / J > 1 else 0.0


def solve_rate_max_awgn(config: GfdmConfig, snr: Snr, receiver: str = "ZF",
                        opts: OptOptions = OptOptions()) -> OptResult:
    """Maximize the ZF or MMSE sum rate in AWGN by minimizing its noise cost."""
    if config.K < 2:
        raise ConfigurationError("rate maximization needs K > 1")
    if receiver not in ("ZF", "MMSE"):
        raise DomainError(f"receiver must be ZF or MMSE, got {receiver!r}")
    s = _snr(snr)
    delta = 0.0 if receiver == "ZF" else 1.0 / s
    vg = lambda g: noise_cost(g, config.K, delta)
    val = lambda g: vg(g)[0]
    scale = math.sqrt(config.M)
    best = None
    for r, rng in enumerate(_restart_rngs(opts)):
        tr = _Trace()
        x, f, conv = _descend(val, vg, _random_filter(rng, config.M), _sphere, _sphere_tangent, scale, opts, tr)
        if best is None or f < best[1]:
            best = (x, f, conv, r, tr)
    x, f, conv, r, tr = best
    rate = _awgn_rate_from_cost(config, s, f, receiver)
    return OptResult(
        filter=FilterSpec(x), objective=f, objective_trace=tr.values, trace_stage=tr.stages,
        converged=conv, best_restart=r, seed=opts.seed, problem=f"rate_max_{receiver.lower()}",
        info={"sum_rate": rate, "rate_upper_bound": config.N * math.log2(1.0 + s)},
    )


# ---------------------------------------------------------------------------
# out-of-band emission


def _stopband(config, guard, opts, window=None, windowed=None, Ps=1.0):
    return StopbandModel(config, guard, Ps=Ps, window=window, windowed=windowed,
                         density=opts.density, span=opts.span)


def _baselines(model: StopbandModel, M: int) -> dict:
    return {
        "dirichlet": model.objective(build_filter_dirichlet(M).gamma),
        "rrc_0.5": model.objective(build_filter_rrc(M, 0.5).gamma),
        "rrc_0.9": model.objective(build_filter_rrc(M, 0.9).gamma),
    }


def _minimax_runs(model: StopbandModel, starts, opts: OptOptions, norm: float,
                  penalty: Optional[Callable] = None):
    """p-norm continuation from each start; returns ``(x, converged, trace)``
    per start.

    ``penalty(gamma, weight) -> (value, grad)`` adds a smooth constraint
    term whose weight is escalated per round; without it each start runs
    the p schedule once.
    """
    scale = math.sqrt(model.config.M)
    rounds = [None] if penalty is None else [opts.penalty0 * opts.penalty_growth ** i
                                             for i in range(opts.penalty_rounds)]
    runs = []
    for x0 in starts:
        tr = _Trace()
        x = x0
        conv = True
        stage = 0
        for weight in rounds:
            for p in opts.p_schedule:
                def vg(g, p=p, weight=weight):
                    S, G = model.smoothed(g, p)
                    v, G = S / norm, G / norm
                    if weight is not None:
                        pv, pg = penalty(g, weight)
                        v, G = v + pv, G + pg
                    return v, G

                x, _, c = _descend(lambda g: vg(g)[0], vg, x, _sphere, _sphere_tangent, scale, opts, tr, stage)
                conv = conv and c
                stage += 1
        runs.append((x, conv, tr))
    return runs


def _minimax_filter(model: StopbandModel, starts, opts: OptOptions, norm: float):
    """Best unconstrained run by true stopband max: ``(x, f, converged, restart, trace)``."""
    best = None
    for r, (x, conv, tr) in enumerate(_minimax_runs(model, starts, opts, norm)):
        f = model.objective(x)
        if best is None or f < best[1]:
            best = (x, f, conv, r, tr)
    return best


def _oob_starts(config, opts):
    return [_random_filter(rng, config.M) for rng in _restart_rngs(opts)]


def solve_oob_mfsic(config: GfdmConfig, Ps: float = 1.0, opts: OptOptions = OptOptions(),
                    guard: Optional[float] = None) -> OptResult:
    """Minimize the worst-case stopband PSD over ``[guard, guard + span*K/Ts]``.

    ``guard`` defaults to ``1/Ts``. Any power-normalized filter is rate
    optimal under ideal MF/SIC, so only the power constraint applies.
    """
    guard = 1.0 / config.Ts if guard is None else guard
    model = _stopband(config, guard, opts, Ps=Ps)
    base = _baselines(model, config.M)
    x, f, conv, r, tr = _minimax_filter(model, _oob_starts(config, opts), opts, base["dirichlet"])
    return OptResult(
        filter=FilterSpec(x), objective=f, objective_trace=tr.values, trace_stage=tr.stages,
        converged=conv, best_restart=r, baselines=base, seed=opts.seed, problem="oob_mfsic",
        info={"guard": guard, "Ps": Ps},
    )


def solve_oob_zf(config: GfdmConfig, snr: Snr, eta: float, Ps: Optional[float] = None,
                 opts: OptOptions = OptOptions(), guard: Optional[float] = None) -> OptResult:
    """Stopband minimization subject to ``R_ZF >= (1 - eta) R_max``.

    The rate constraint enters as a quadratic penalty whose weight grows
    by ``penalty_growth`` per round. A final restoration step moves the
    filter towards the Dirichlet filter along the normalized segment until
    the constraint holds exactly.
    """
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta!r}")
    s = _snr(snr)
    Ps = s if Ps is None else Ps
    guard = 1.0 / config.Ts if guard is None else guard
    N = config.N
    r_max = N * math.log2(1.0 + s)
    target = (1.0 - eta) * r_max
    # the penalized problem aims slightly above the target so that its
    # solutions are usually feasible without restoration
    aim = min(target + 1e-4 * r_max, r_max)
    model = _stopband(config, guard, opts, Ps=Ps)
    base = _baselines(model, config.M)

    def rate(g):
        J = noise_cost(g, config.K)[0]
        return N * math.log2(1.0 + s / J) if np.isfinite(J) else 0.0

    def penalty(g, weight):
        J, dJ = noise_cost(g, config.K)
        if not np.isfinite(J):
            return math.inf, np.zeros_like(dJ)
        R = N * math.log2(1.0 + s / J)
        short = (aim - R) / r_max
        if short <= 0:
            return 0.0, np.zeros_like(dJ)
        dR = -N / math.log(2) * (s / J ** 2) / (1.0 + s / J) * dJ
        return weight * short ** 2, -2.0 * weight * short / r_max * dR

    gD = build_filter_dirichlet(config.M).gamma

    def rate_grad(g):
        J, dJ = noise_cost(g, config.K)
        return -N / math.log(2) * (s / J ** 2) / (1.0 + s / J) * dJ

    def bisect(path, lo, hi):
        """Smallest t in [lo, hi] with rate(path(t)) >= target, assuming path(hi) is feasible."""
        while hi - lo > 1e-15 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if rate(path(mid)) >= target:
                hi = mid
            else:
                lo = mid
        return hi

    def restore(x):
        """Move a slightly infeasible filter onto the rate constraint.

        First climbs the rate along its tangential gradient; if that
        fails, blends towards the Dirichlet filter, which always meets
        the target.
        """
        if rate(x) >= target:
            return x, 0.0
        for _ in range(20):
            d = _sphere_tangent(x, rate_grad(x))
            d = d / np.linalg.norm(d) * math.sqrt(config.M)
            path = lambda t, x=x, d=d: _sphere(x + t * d)
            t = 1e-8
            while rate(path(t)) < target and t < 1.0:
                if rate(path(2 * t)) < rate(path(t)):
                    break
                t *= 2.0
            if rate(path(t)) >= target:
                return path(bisect(path, 0.0, t)), 0.0
            x = path(t)
        path = lambda t: _sphere((1.0 - t) * x + t * gD)
        t = bisect(path, 0.0, 1.0)
        return path(t), t

    best = None
    runs = _minimax_runs(model, _oob_starts(config, opts), opts, base["dirichlet"], penalty)
    for i, (x, conv, tr) in enumerate(runs):
        x, t = restore(x)
        f = model.objective(x)
        if best is None or f < best[1]:
            best = (x, f, conv, i, tr, t)
    x, f, conv, r, tr, restored = best
    residual = max(0.0, target - rate(x)) / max(target, 1e-300)
    if residual > 1e-6:
        raise InfeasibleError("rate constraint not met", residual)
    return OptResult(
        filter=FilterSpec(x), objective=f, objective_trace=tr.values, trace_stage=tr.stages,
        converged=conv, best_restart=r, constraint_residuals=[residual], baselines=base,
        seed=opts.seed, problem="oob_zf",
        info={"eta": eta, "guard": guard, "Ps": Ps, "sum_rate_zf": rate(x), "rate_target": target,
              "restoration_blend": restored},
    )


# ---------------------------------------------------------------------------
# rate under carrier frequency offsets


def cfo_draw_sets(config: GfdmConfig, half_width: float, n_mc: int, seed: int,
                  channel_profile: str = "awgn", filt: Optional[FilterSpec] = None, **kw):
    """Training and held-out draw sets from disjoint child seeds.

    With ``filt`` given, fading draws that make the nominal matrix singular
    are redrawn once from the same stream.
    """
    out = []
    for child in np.random.SeedSequence(seed).spawn(2):
        rng = np.random.default_rng(child)
        draws = draw_cfo_set(config.K, half_width, n_mc, rng, channel_profile, **kw)
        out.append(draws if filt is None else screen_draws(config, filt, draws, rng, **kw))
    return tuple(out)


def solve_rate_max_cfo(config: GfdmConfig, snr: Snr, cfo_half_width: float,
                       channel_profile: str = "awgn", n_mc: Optional[int] = None,
                       opts: OptOptions = OptOptions(restarts=1), noise_model: str = "row_norm",
                       start: Optional[FilterSpec] = None) -> OptResult:
    """Maximize the mean nominal-ZF rate over frozen CFO draws.

    Starts from a slightly perturbed Dirichlet filter (the rate-optimal
    filter without CFO); further restarts add larger perturbations. The
    result carries the held-out mean rate of the optimized and Dirichlet
    filters, evaluated on draws from a disjoint seed.
    """
    n_mc = opts.n_mc if n_mc is None else n_mc
    gD = build_filter_dirichlet(config.M).gamma if start is None else start.gamma
    train, held = cfo_draw_sets(config, cfo_half_width, n_mc, opts.seed, channel_profile, FilterSpec(gD))
    obj = CfoRateObjective(config, snr, train, noise_model)
    def neg_vg(g):
        v, G = obj.value_and_grad(g)
        return -v, -G

    neg_v = lambda g: -obj.value(g)
    scale = math.sqrt(config.M)
    best = None
    for r, rng in enumerate(_restart_rngs(opts)):
        amp = 1e-3 * (1 + 10 * r)
        x0 = gD + amp * (rng.standard_normal(gD.size) + 1j * rng.standard_normal(gD.size))
        tr = _Trace()
        x, f, conv = _descend(neg_v, neg_vg, x0, _sphere, _sphere_tangent, scale, opts, tr)
        if best is None or f < best[1]:
            best = (x, f, conv, r, tr)
    x, f, conv, r, tr = best
    held_obj = CfoRateObjective(config, snr, held, noise_model)
    dir_gamma = build_filter_dirichlet(config.M).gamma
    info = {
        "train_mean_rate": -f,
        "heldout_mean_rate": held_obj.value(x),
        "heldout_dirichlet_rate": held_obj.value(dir_gamma),
        "train_dirichlet_rate": obj.value(dir_gamma),
        "half_width": cfo_half_width,
        "n_mc": n_mc,
        "channel_profile": channel_profile,
        "noise_model": noise_model,
    }
    return OptResult(
        filter=FilterSpec(x), objective=-f, objective_trace=[-v for v in tr.values], trace_stage=tr.stages,
        converged=conv, best_restart=r, seed=opts.seed, problem="rate_max_cfo",
        baselines={"dirichlet": info["train_dirichlet_rate"]}, info=info,
    )


# ---------------------------------------------------------------------------
# alternating filter / window design


def _window_step(model: StopbandModel, gamma, taper, opts: OptOptions, norm: float):
    """Minimize the smoothed stopband max over the taper in ``[0, 1]``
    with central-difference gradients; returns the new taper."""
    Nw = taper.size
    h = opts.fd_step

    def value(w, p):
        model.set_taper(w)
        return model.smoothed(gamma, p)[0] / norm

    def vg(w, p):
        f0 = value(w, p)
        g = np.zeros(Nw)
        for i in range(Nw):
            up, dn = w.copy(), w.copy()
            up[i] = min(w[i] + h, 1.0)
            dn[i] = max(w[i] - h, 0.0)
            g[i] = (value(up, p) - value(dn, p)) / (up[i] - dn[i])
        return f0, g

    def tangent(w, g):
        # drop components that push against an active bound
        d = g.copy()
        d[(w <= 0.0) & (g > 0)] = 0.0
        d[(w >= 1.0) & (g < 0)] = 0.0
        return d

    clip = lambda w: np.clip(np.real(w), 0.0, 1.0)
    w = taper.astype(float)
    for p in opts.p_schedule:
        w, _, _ = _descend(lambda v, p=p: value(v, p), lambda v, p=p: vg(v, p), w, clip, tangent,
                           1.0, opts, max_iters=min(opts.max_iters, 100))
    model.set_taper(w)
    return w


def joint_design_oob(config: GfdmConfig, L_stop: float, opts: OptOptions = OptOptions(),
                     mode: str = "unified", Ps: float = 1.0) -> OptResult:
    """Alternate filter and window optimization for stopband emission.

    ``config`` carries ``Ncp`` and ``Nw``. In ``"unified"`` mode both steps
    minimize the same objective on ``[L_stop/Ts, ...)`` and a step is kept
    only if that objective does not increase, so the trace is monotone.
    ``"literal"`` mode uses ``1/Ts`` for the filter step and ``L_stop/Ts``
    for the window step and keeps every step.
    """
    if mode not in ("unified", "literal"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if L_stop < 1:
        raise DomainError("L_stop must be at least 1")
    guard = L_stop / config.Ts
    rect = WindowSpec.rectangular(config.Nw)
    shared = _stopband(config, guard, opts, window=rect, windowed=True, Ps=Ps)
    filt_guard = guard if mode == "unified" else 1.0 / config.Ts
    fmodel = shared if mode == "unified" else _stopband(config, filt_guard, opts, window=rect, windowed=True, Ps=Ps)
    dirichlet = build_filter_dirichlet(config.M).gamma
    base = {"dirichlet_rect": shared.objective(dirichlet)}
    norm = base["dirichlet_rect"]
    fnorm = fmodel.objective(dirichlet)

    # first filter step with restarts; this is also the filter-only design
    gamma, _, _, r0, _ = _minimax_filter(fmodel, _oob_starts(config, opts), opts, fnorm)
    taper = rect.taper.copy()
    current = shared.objective(gamma)
    base["filter_only"] = current
    trace = [current]
    stages = [0]
    history = [{"step": "filter", "objective": current, "accepted": True}]
    single = OptOptions(**{**asdict(opts), "restarts": 1})
    converged = False
    it = 0
    if not config.Nw:
        # no taper to optimize: the alternation would repeat the filter step
        converged = True
    while not converged and it < opts.max_iters:
        it += 1
        prev = current
        # window step
        shared.set_taper(taper)
        w_new = _window_step(shared, gamma, taper, opts, norm)
        cand = shared.objective(gamma)
        ok = mode == "literal" or cand <= current
        history.append({"step": "window", "objective": cand, "accepted": ok})
        if ok:
            taper, current = w_new, cand
        shared.set_taper(taper)
        # filter step from the current filter
        if mode == "literal":
            fmodel.set_taper(taper)
        g_new, _, _, _, _ = _minimax_filter(fmodel, [gamma], single, fmodel.objective(dirichlet))
        cand = shared.objective(g_new)
        ok = mode == "literal" or cand <= current
        history.append({"step": "filter", "objective": cand, "accepted": ok})
        if ok:
            gamma, current = g_new, cand
        trace.append(current)
        stages.append(it)
        rel = abs(prev - current) / max(abs(prev), 1e-300)
        if it >= opts.min_iters and rel < opts.tol:
            converged = True
            break
    window = WindowSpec(taper)
    return OptResult(
        filter=FilterSpec(gamma), objective=current, objective_trace=trace, trace_stage=stages,
        converged=converged, best_restart=r0, window=window, baselines=base, seed=opts.seed,
        problem="joint_design_oob",
        info={"mode": mode, "L_stop": L_stop, "guard": guard, "iterations": it, "history": history},
    )
