"""Order-parameter dynamics on a 1D periodic ring and winding statistics.

The complex field psi on a ring of circumference L (in units of the
thermal de Broglie length at the transition) relaxes by the dissipative
equation

    tau0 dpsi/dt = laplacian(psi) + beta*mu(t) psi - beta*Lambda |psi|^2 psi

integrated pseudo-spectrally with semi-implicit time stepping: the
stiff linear part (gradient + drive) is treated implicitly in Fourier
space, the cubic term explicitly, so the step is unconditionally stable.

Runs are seeded from the linear-theory mode occupations frozen at the
freeze-out time t_hat: each Fourier amplitude is an independent complex
Gaussian with the prescribed mean square, which is the coherent-state
distribution the linear kinetics hands over.  The net phase winding of
the final field is the persistent-current quantum number; across an
ensemble its RMS scales like sqrt(L / xi_hat), i.e. tau_Q^{-1/8}.

The random-walk pipeline shortcuts the field dynamics entirely: one
uniform phase per frozen domain, winding from the wrapped increments.
Both pipelines share the scan driver so their scaling can be compared
on equal footing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, NumericsError
from .linear_qkt import freeze_out_time, frozen_correlation_length
from .schedules import QuenchSchedule, make_tanh

__all__ = [
    "RingField",
    "WindingSample",
    "ScanRow",
    "winding_number",
    "wrap_phase",
    "sample_initial_field",
    "mode_occupations",
    "integrate_ring",
    "random_walk_winding",
    "kz_scan",
    "domain_scan",
]


@dataclass
class RingField:
    """Complex order parameter on a periodic lattice of circumference l."""

    psi: np.ndarray
    l: float
    t: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.ndim != 1 or self.psi.size < 8:
            raise ConfigError(f"need a 1D field with >= 8 sites, got shape {self.psi.shape}")
        if self.l <= 0:
            raise ConfigError(f"circumference must be positive, got {self.l}")
        if not np.all(np.isfinite(self.psi.view(float))):
            raise ConfigError("field contains non-finite values")

    @property
    def n_sites(self) -> int:
        return self.psi.size

    @property
    def dx(self) -> float:
        return self.l / self.psi.size


@dataclass(frozen=True)
class WindingSample:
    """One ensemble member's final winding."""

    w: int
    tau_q: float
    seed: int
    final_density: float


def wrap_phase(d):
    """Wrap phase differences into (-pi, pi], ties to +pi."""
    return np.pi - np.mod(np.pi - np.asarray(d), 2.0 * np.pi)


def _winding_from_angles(theta):
    """Winding of a cyclic sequence of phases; theta has shape (..., N)."""
    d = np.diff(theta, axis=-1, append=theta[..., :1])
    total = wrap_phase(d).sum(axis=-1) / (2.0 * np.pi)
    w = np.rint(total)
    if np.any(np.abs(total - w) > 1e-6):
        raise NumericsError("winding sum is not an integer multiple of 2*pi")
    return w.astype(int)


def winding_number(field: RingField) -> int:
    """Net phase winding (1/2pi) * sum of wrapped site-to-site increments."""
    amp = np.abs(field.psi)
    zero = np.nonzero(amp == 0.0)[0]
    if zero.size:
        raise NumericsError(f"winding undefined: zero amplitude at site {zero[0]}")
    return int(_winding_from_angles(np.angle(field.psi)))


def sample_initial_field(nbars: dict, n_sites: int, rng_seed, l: float) -> RingField:
    """Draw a coherent-state field: psi_k complex Gaussian, <|psi_k|^2> = nbar_k.

    nbars maps integer mode numbers k (|k| < n_sites/2) to mean
    occupations.  The real-space field is (1/sqrt(L)) sum_k psi_k
    e^{i 2pi k x / L}, so the mean density is sum_k nbar_k / L.
    """
    ks = np.array(sorted(nbars.keys()), dtype=int)
    if ks.size == 0:
        raise ConfigError("nbars is empty")
    if np.any(np.abs(ks) >= n_sites // 2):
        bad = ks[np.abs(ks) >= n_sites // 2]
        raise ConfigError(f"mode |k|={abs(bad[0])} does not fit on {n_sites} sites")
    vals = np.array([nbars[int(k)] for k in ks], dtype=float)
    if np.any(vals < 0):
        raise ConfigError("mode occupations must be >= 0")

    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    z = rng.standard_normal((2, ks.size))
    psi_k = (z[0] + 1j * z[1]) * np.sqrt(vals / 2.0)
    spec = np.zeros(n_sites, dtype=complex)
    spec[ks % n_sites] = psi_k
    psi = np.fft.ifft(spec) * n_sites / math.sqrt(l)
    return RingField(psi=psi, l=l)


def mode_occupations(field: RingField) -> np.ndarray:
    """|psi_k|^2 in the sampling convention, indexed by FFT bin."""
    spec = np.fft.fft(field.psi) / field.n_sites * math.sqrt(field.l)
    return np.abs(spec) ** 2


def _bmu_max(s: QuenchSchedule, t0: float, t1: float) -> float:
    # schedules are monotone (or constant): the sup is at an endpoint
    return max(s.beta_mu(t0), s.beta_mu(t1))


def _step_batch(psi, s, lam, tau0, t0, t1, dt, q2, amp_cap, check_every=25):
    """Semi-implicit stepping of a (runs, N) batch from t0 to t1.

    Returns (psi, aborted) where aborted marks rows whose amplitude
    blew past amp_cap.  Each row's arithmetic is independent of the
    batch composition, so results do not depend on how an ensemble is
    chunked across workers.
    """
    runs = psi.shape[0]
    aborted = np.zeros(runs, dtype=bool)
    t = t0
    steps = 0
    while t < t1 - 1e-12:
        h = min(dt, t1 - t)
        bmu = s.beta_mu(t + 0.5 * h)
        # diverging rows may overflow between checks; the isfinite test
        # below owns that case, so keep numpy quiet here
        with np.errstate(over="ignore", invalid="ignore"):
            nl = psi * (np.abs(psi) ** 2)
            ph = np.fft.fft(psi, axis=-1)
            nh = np.fft.fft(nl, axis=-1)
            ph = (ph - (h / tau0) * lam * nh) / (1.0 + (h / tau0) * (q2 - bmu))
            psi = np.fft.ifft(ph, axis=-1)
        t += h
        steps += 1
        if steps % check_every == 0:
            peak = np.abs(psi).max(axis=-1)
            bad = ~np.isfinite(peak) | (peak > amp_cap)
            if np.any(bad & ~aborted):
                aborted |= bad
                psi[aborted] = 0.0  # stop feeding garbage through the FFT
    return psi, aborted


def integrate_ring(
    field: RingField,
    s: QuenchSchedule,
    lam: float,
    tau0: float,
    t_f: float,
    dt: float = 0.25,
    record_times=None,
) -> list[RingField]:
    """Integrate one field to t_f; returns snapshots at record_times plus the end.

    Aborts if the amplitude exceeds 10x the largest stable uniform value
    over the run window.
    """
    if lam <= 0:
        raise ConfigError(f"lam must be positive, got {lam}")
    if tau0 <= 0:
        raise ConfigError(f"tau0 must be positive, got {tau0}")
    if t_f <= field.t:
        raise ConfigError(f"t_f={t_f} must exceed field time {field.t}")

    n = field.n_sites
    q = 2.0 * np.pi * np.fft.fftfreq(n, d=field.dx)
    q2 = q**2
    bmu_hi = _bmu_max(s, field.t, t_f)
    amp_cap = 10.0 * max(math.sqrt(max(bmu_hi, 0.0) / lam), float(np.abs(field.psi).max()), 1e-12)

    if record_times is None:
        record_times = []
    marks = sorted(set(float(x) for x in record_times if field.t <= x <= t_f) | {t_f})

    psi = field.psi[None, :].copy()
    t = field.t
    out = []
    for mark in marks:
        if mark > t:
            psi, aborted = _step_batch(psi, s, lam, tau0, t, mark, dt, q2, amp_cap)
            if aborted[0]:
                raise NumericsError(
                    f"field amplitude blew past {amp_cap:.3g} before t={mark}"
                )
            t = mark
        out.append(RingField(psi=psi[0].copy(), l=field.l, t=t))
    return out


def random_walk_winding(n_domains: int, rng_seed) -> int:
    """Winding of one ring of n_domains independently drawn uniform phases."""
    if n_domains < 1:
        raise ConfigError(f"n_domains must be >= 1, got {n_domains}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    theta = rng.uniform(-np.pi, np.pi, size=n_domains)
    return int(_winding_from_angles(theta))


def _random_walk_batch(n_domains, count, rng, chunk=8192):
    out = np.empty(count, dtype=int)
    done = 0
    while done < count:
        m = min(chunk, count - done)
        theta = rng.uniform(-np.pi, np.pi, size=(m, n_domains))
        out[done:done + m] = _winding_from_angles(theta)
        done += m
    return out


@dataclass
class ScanRow:
    """One tau_Q point of a winding-statistics scan."""

    tau_q: float
    xi_hat: float
    n_domains: int
    runs: int
    w_rms: float
    w_rms_stderr: float
    pipeline: str
    n_aborted: int = 0
    n_unfrozen: int = 0
    samples: list = field(default_factory=list)


def _spectrum_occupations(tau_q, l, k_max, gamma0, beta_c, rtol=1e-9):
    """nbar_k at t_hat for the ring spectrum under the tanh quench.

    Vectorized equivalent of per-mode integrate_occupancy with
    e_k = (2 pi k / l)^2; one diagonal ODE solve for all modes.
    """
    ks = np.arange(-k_max, k_max + 1)
    be = beta_c * (2.0 * np.pi * ks / l) ** 2
    that = freeze_out_time(tau_q, gamma0)
    t0 = -3.0 * tau_q

    def bmu(t):
        return math.tanh(t / tau_q)

    n0 = 1.0 / np.expm1(be - bmu(t0))

    def rhs(t, n):
        b = bmu(t)
        return gamma0 * math.exp(b) * (1.0 + (1.0 - np.exp(be - b)) * n)

    sol = solve_ivp(rhs, (t0, that), n0, method="LSODA", rtol=rtol, atol=1e-12)
    if not sol.success:
        raise NumericsError(f"spectrum occupancy integration failed: {sol.message}")
    return ks, np.clip(sol.y[:, -1], 0.0, None), that


def _ring_end_time(rho_seed, tau_q, that, lam, tau0):
    """Deterministic end time: expected uniform-mode growth reaches saturation.

    Marching the closed-form amplification of the k=0 mode keeps the end
    time a function of parameters only, never of sampled fields, so
    ensemble chunking cannot change it.
    """
    lc_hat = math.log(math.cosh(that / tau_q))

    def expected(t):
        growth = tau_q * (math.log(math.cosh(t / tau_q)) - lc_hat)
        return rho_seed * math.exp(2.0 * growth / tau0)

    t = that
    while expected(t) < math.tanh(t / tau_q) / lam:
        t += 0.5 * tau0
        if t >= 6.0 * tau_q:
            break
    return min(t + 2.0 * that + 10.0 * tau0, 8.0 * tau_q + that)


def _ring_chunk(args):
    """Integrate a contiguous chunk of ring runs; used by worker pools."""
    (tau_q, i_tau, run_lo, run_hi, l, n_sites, k_max, lam, tau0, dt,
     seed_fraction, master_seed, gamma0, beta_c) = args
    ks, nbars, that = _spectrum_occupations(tau_q, l, k_max, gamma0, beta_c)
    s = make_tanh(tau_q, beta_c=beta_c, constant_beta=True)

    raw_density = nbars.sum() / l
    bmu_hat = math.tanh(that / tau_q)
    scale = seed_fraction * bmu_hat / lam / raw_density
    nb = {int(k): float(v * scale) for k, v in zip(ks, nbars)}

    t_end = _ring_end_time(nbars.sum() * scale / l, tau_q, that, lam, tau0)
    runs = run_hi - run_lo
    psi = np.empty((runs, n_sites), dtype=complex)
    for i, run in enumerate(range(run_lo, run_hi)):
        rng = np.random.default_rng([master_seed, 7, i_tau, run])
        f = sample_initial_field(nb, n_sites, rng, l)
        psi[i] = f.psi

    q = 2.0 * np.pi * np.fft.fftfreq(n_sites, d=l / n_sites)
    bmu_end = s.beta_mu(t_end)
    amp_cap = 10.0 * max(math.sqrt(max(bmu_end, 0.0) / lam), float(np.abs(psi).max()), 1e-12)
    psi, aborted = _step_batch(psi, s, lam, tau0, that, t_end, dt, q**2, amp_cap)

    dens = np.abs(psi) ** 2
    sat = max(bmu_end, 0.0) / lam
    w = np.zeros(runs, dtype=int)
    unfrozen = np.zeros(runs, dtype=bool)
    for i in range(runs):
        if aborted[i]:
            continue
        w[i] = _winding_from_angles(np.angle(psi[i]))
        unfrozen[i] = dens[i].min() < 0.5 * sat
    return w, dens.mean(axis=1), aborted, unfrozen


def kz_scan(
    tau_qs,
    runs: int,
    pipeline: str,
    l: float = 256.0,
    n_sites: int = 512,
    k_max: int | None = None,
    lam: float = 1.0,
    tau0: float = 1.0,
    dt: float = 0.25,
    seed_fraction: float = 1e-2,
    master_seed: int = 0,
    gamma0: float = 1.0,
    beta_c: float = 1.0,
    workers: int = 1,
) -> list[ScanRow]:
    """Winding statistics versus quench time for either pipeline.

    ring-tdgl: coherent-state seeds from the frozen linear spectrum,
    semi-implicit field evolution through the quench, final winding per
    run.  random-walk: N_d = round(L / xi_hat) uniform domain phases per
    run.  Per-run random streams are keyed by (master_seed, pipeline
    tag, tau index, run index): results are reproducible for any worker
    count or chunking.
    """
    tau_qs = [float(t) for t in tau_qs]
    if runs < 0:
        raise ConfigError(f"runs must be >= 0, got {runs}")
    if pipeline not in ("ring-tdgl", "random-walk"):
        raise ConfigError(f"unknown pipeline {pipeline!r}")
    if k_max is None:
        k_max = n_sites // 4

    rows = []
    for i_tau, tau_q in enumerate(tau_qs):
        xi = frozen_correlation_length(tau_q, gamma0)
        n_d = int(round(l / xi))
        if runs == 0:
            continue
        if pipeline == "random-walk":
            rng = np.random.default_rng([master_seed, 11, i_tau])
            w = _random_walk_batch(n_d, runs, rng)
            dens = np.full(runs, float("nan"))
            aborted = np.zeros(runs, dtype=bool)
            unfrozen = np.zeros(runs, dtype=bool)
        else:
            bounds = _chunk_bounds(runs, workers)
            args = [
                (tau_q, i_tau, lo, hi, l, n_sites, k_max, lam, tau0, dt,
                 seed_fraction, master_seed, gamma0, beta_c)
                for lo, hi in bounds
            ]
            if workers > 1 and len(args) > 1:
                from concurrent.futures import ProcessPoolExecutor

                with ProcessPoolExecutor(max_workers=workers) as pool:
                    parts = list(pool.map(_ring_chunk, args))
            else:
                parts = [_ring_chunk(a) for a in args]
            w = np.concatenate([p[0] for p in parts])
            dens = np.concatenate([p[1] for p in parts])
            aborted = np.concatenate([p[2] for p in parts])
            unfrozen = np.concatenate([p[3] for p in parts])

        ok = ~aborted
        from .analysis import ensemble_rms

        if not np.any(ok):
            raise NumericsError(f"all runs aborted at tau_q={tau_q}")
        w_rms, stderr = ensemble_rms(w[ok])
        samples = [
            WindingSample(w=int(w[i]), tau_q=tau_q, seed=i, final_density=float(dens[i]))
            for i in range(runs) if ok[i]
        ]
        rows.append(ScanRow(
            tau_q=tau_q, xi_hat=xi, n_domains=n_d, runs=int(ok.sum()),
            w_rms=w_rms, w_rms_stderr=stderr, pipeline=pipeline,
            n_aborted=int(aborted.sum()), n_unfrozen=int(unfrozen.sum()),
            samples=samples,
        ))
    return rows


def _chunk_bounds(runs, workers):
    n_chunks = max(1, min(workers, runs))
    size = (runs + n_chunks - 1) // n_chunks
    return [(lo, min(lo + size, runs)) for lo in range(0, runs, size)]


def domain_scan(n_domains_list, runs: int, master_seed: int = 0) -> list[ScanRow]:
    """Random-walk winding statistics versus the domain count directly.

    Bypasses the quench-time parameterization: rows carry nan for tau_q
    and xi_hat.  Useful for checking W_rms ~ sqrt(N_d).
    """
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    from .analysis import ensemble_rms

    rows = []
    for i, n_d in enumerate(n_domains_list):
        n_d = int(n_d)
        rng = np.random.default_rng([master_seed, 13, i])
        w = _random_walk_batch(n_d, runs, rng)
        w_rms, stderr = ensemble_rms(w)
        rows.append(ScanRow(
            tau_q=float("nan"), xi_hat=float("nan"), n_domains=n_d, runs=runs,
            w_rms=w_rms, w_rms_stderr=stderr, pipeline="random-walk",
            samples=[WindingSample(w=int(x), tau_q=float("nan"), seed=j,
                                   final_density=float("nan"))
                     for j, x in enumerate(w)] if runs <= 10000 else [],
        ))
    return rows
