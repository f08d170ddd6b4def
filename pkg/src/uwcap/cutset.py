"""Cut-set upper bound across the vertical cut.

The channel matrix ``H`` has destinations along rows and sources along
columns, ``H[k, i] = exp(j theta_ki) / sqrt(A(r_ki, f))``. Column ``i`` of the
normalised matrix ``F`` is column ``i`` of ``H`` divided by ``sqrt(d_i)``,
where ``d_i = sum_k 1 / A(r_ki, f)`` is the power source ``i`` delivers
across the cut.

Monte Carlo trials draw their phases from a counter-based stream: trial
``t`` of master seed ``s`` uses ``SeedSequence(s, spawn_key=(t,))``. Any
trial can therefore be regenerated on its own, and results do not depend
on how trials are spread over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .channel import LN2, ChannelState, LogValue, log_sum_exp
from .errors import NumericalError, RegimeError, ResourceError, UsageError
from .topology import CutInstance, build_regular, vertical_cut

# linear-domain Gram entries below this are flushed to zero
UNDERFLOW_CLAMP = 1e-300
DEFAULT_MEMORY_CAP = 4 * 2**30
MAX_EXACT_N = 16384


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(trial),)))


def ln_inverse_attenuation(cut: CutInstance, channel: ChannelState) -> np.ndarray:
    """``-ln A(r_ki, f)``, destinations along rows."""
    return -channel.ln_attenuation(cut.distances())


@dataclass(frozen=True, eq=False)
class PowerTransferVector:
    d_ln: np.ndarray  # ln d_i per source, cut order
    P: float
    total_ln: LogValue  # ln sum_i d_i

    @property
    def received_power_ln(self) -> np.ndarray:
        """``ln P_i = ln P + ln d_i``."""
        return math.log(self.P) + self.d_ln


def power_transfer_exact(cut: CutInstance, channel: ChannelState, P: float = 1.0) -> PowerTransferVector:
    """Brute-force ``d_i = (1/c0) sum_k r_ki^-alpha a^-r_ki`` over every destination."""
    if len(cut.destinations) == 0:
        raise UsageError("power transfer needs a nonempty destination set")
    d_ln = logsumexp(ln_inverse_attenuation(cut, channel), axis=0)
    d_ln.flags.writeable = False
    return PowerTransferVector(d_ln, float(P), log_sum_exp(d_ln))


def envelope_shape_ln(i_x, channel: ChannelState):
    """``ln(i_x^(1-alpha) a^-i_x)``."""
    i_x = np.asarray(i_x, dtype=float)
    return (1.0 - channel.alpha) * np.log(i_x) - i_x * channel.ln_a


@lru_cache(maxsize=256)
def calibrate_envelope(alpha: float, ln_a: float, depth: int = 16) -> tuple[float, float]:
    """Envelope constants ``(c_lo, c_hi)`` for ``1 <= i_x <= depth`` (with ``c0 = 1``).

    ``c_lo`` is the smallest ratio ``d_i / shape(i_x)`` on the ``(2 depth)^2``
    lattice; corner rows of the smallest network covering ``depth`` are the
    worst case, and larger networks only add destinations. ``c_hi`` is the
    largest ratio for a row far from the edges in a network wide enough that
    the absorption tail beyond it is below double precision.
    """
    ch = ChannelState.from_parameters(ln_a, alpha)
    m = 2 * depth
    cut = vertical_cut(build_regular(m * m))
    ratio = power_transfer_exact(cut, ch).d_ln - envelope_shape_ln(cut.source_coords[:, 0], ch)
    c_lo = float(np.exp(ratio.min()))

    reach = depth + int(math.ceil(40.0 / ln_a)) + 1
    i_x = np.arange(1, depth + 1)
    kx = np.arange(1, reach + 1)
    dy = np.arange(-reach, reach + 1)
    KX, DY = np.meshgrid(kx, dy, indexing="ij")
    r = np.hypot(i_x[:, None, None] + KX[None] - 1, DY[None])
    d_ln = logsumexp((-ch.ln_attenuation(r)).reshape(depth, -1), axis=1)
    c_hi = float(np.exp((d_ln - envelope_shape_ln(i_x, ch)).max()))
    return c_lo, c_hi


def power_transfer_envelope(i_x, channel: ChannelState, depth: int = 16) -> tuple[LogValue, LogValue]:
    """Lower and upper envelope ``c * i_x^(1-alpha) * a^-i_x`` for one source column."""
    if channel.ln_a <= 0:
        raise RegimeError("the power-transfer envelope needs a(f) > 1")
    if not 1 <= i_x <= depth:
        raise UsageError(f"i_x must lie in [1, {depth}] for this calibration")
    c_lo, c_hi = calibrate_envelope(channel.alpha, channel.ln_a, depth)
    base = float(envelope_shape_ln(i_x, channel)) - math.log(channel.c0)
    return LogValue(base + math.log(c_lo)), LogValue(base + math.log(c_hi))


def normalized_gram_sums(cut: CutInstance, channel: ChannelState):
    """Column and row sums of ``|F_ki|^2``. Columns sum to one by construction."""
    lninv = ln_inverse_attenuation(cut, channel)
    d_ln = logsumexp(lninv, axis=0)
    ln_f2 = lninv - d_ln[None, :]
    col = np.exp(logsumexp(ln_f2, axis=0))
    row = np.exp(logsumexp(ln_f2, axis=1))
    return col, row


def _check_memory(cut: CutInstance, memory_cap: int) -> None:
    n_d, n_s = len(cut.destinations), len(cut.source_coords)
    if n_d + n_s > MAX_EXACT_N:
        raise ResourceError(f"exact cut computations are capped at n = {MAX_EXACT_N}")
    # distances, log attenuation, H, Gram and LAPACK workspace
    need = n_d * n_s * (8 + 8 + 16) + 3 * n_s * n_s * 16
    if need > memory_cap:
        raise ResourceError(f"cut of {n_s}x{n_d} needs ~{need / 2**30:.2f} GiB, "
                            f"cap is {memory_cap / 2**30:.2f} GiB")


def power_iteration(matvec, v0: np.ndarray, tol: float = 1e-6, max_iter: int = 10_000):
    """Largest eigenvalue of a Hermitian PSD operator.

    Starting from a unit vector, the Rayleigh quotient of successive iterates
    never decreases, so the estimate is a lower bound that tightens
    monotonically.
    """
    v = v0 / np.linalg.norm(v0)
    w = matvec(v)
    lam = float(np.vdot(v, w).real)
    for it in range(1, max_iter + 1):
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, it
        v = w / norm
        w = matvec(v)
        new = float(np.vdot(v, w).real)
        if abs(new - lam) <= tol * abs(new):
            return max(new, lam), it
        lam = max(new, lam)
    raise NumericalError(f"power iteration did not reach rel. tol {tol} in {max_iter} "
                         f"iterations (last estimate {lam:.6g})")


def _largest_sv_sq(f_mat: np.ndarray, tol: float) -> float:
    # any column of F has unit norm, so start from one
    v0 = np.zeros(f_mat.shape[1], dtype=complex)
    v0[f_mat.shape[1] // 2] = 1.0
    if f_mat.size > 4096 and np.count_nonzero(f_mat) < 0.25 * f_mat.size:
        f_mat = sparse.csr_matrix(f_mat)
    f_h = f_mat.conj().T
    lam, _ = power_iteration(lambda v: f_h @ (f_mat @ v), v0, tol=tol)
    return lam


class _CutModel:
    """Log-magnitudes of H and F for one cut, shared by all trials."""

    def __init__(self, cut: CutInstance, channel: ChannelState):
        self.lninv = ln_inverse_attenuation(cut, channel)
        self.d_ln = logsumexp(self.lninv, axis=0)
        self.shape = self.lninv.shape
        # scale so the largest |h|^2 is one, then clamp
        self.ln_scale = float(self.lninv.max())
        self.h_mag = self._mag(self.lninv - self.ln_scale)
        self.f_mag = self._mag(self.lninv - self.d_ln[None, :])

    @staticmethod
    def _mag(ln_sq: np.ndarray) -> np.ndarray:
        mag = np.exp(0.5 * ln_sq)
        mag[ln_sq < math.log(UNDERFLOW_CLAMP)] = 0.0
        return mag

    def phases(self, seed: int, trial: int) -> np.ndarray:
        return np.exp(1j * trial_rng(seed, trial).uniform(0.0, 2.0 * math.pi, size=self.shape))


def _logdet_bits(model: _CutModel, phasors: np.ndarray, ln_snr: float) -> float:
    """``log2 det(I + snr * H^H H)`` via Hermitian eigenvalues."""
    hs = model.h_mag * phasors
    gram = hs.conj().T @ hs
    mu = np.linalg.eigvalsh(gram)
    mu = mu[mu > 0]
    # eigenvalues of snr * H^H H are exp(ln_snr + ln_scale) * mu
    return float(np.logaddexp(0.0, ln_snr + model.ln_scale + np.log(mu)).sum() / LN2)


def _map_trials(fn, trials: int, threads: int):
    if threads == 1 or trials == 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(fn, range(trials)))


def largest_sv_trials(cut: CutInstance, channel: ChannelState, trials: int, seed: int,
                      tol: float = 1e-6, threads: int = 1) -> np.ndarray:
    if trials < 1:
        raise UsageError("need at least one trial")
    model = _CutModel(cut, channel)
    return np.array(_map_trials(lambda t: _largest_sv_sq(model.f_mag * model.phases(seed, t), tol),
                                trials, threads))


def largest_sv_mc(cut: CutInstance, channel: ChannelState, trials: int, seed: int,
                  tol: float = 1e-6, threads: int = 1) -> float:
    """Mean of ``||F||_2^2`` over random-phase realisations."""
    return float(largest_sv_trials(cut, channel, trials, seed, tol, threads).mean())


@dataclass(frozen=True, eq=False)
class CutCapacityEstimate:
    """Monte Carlo ergodic value and the analytic bounds it must respect (bits/use)."""

    mc_logdet: float
    trace_bound: float
    sv_bound: float
    sv_estimate: float
    trials: int
    seed: int
    sum_d_ln: LogValue
    mc_logdet_trials: np.ndarray
    sv_trials: np.ndarray

    def chain_holds(self, slack: float = 1e-9) -> bool:
        """Per-trial ``logdet <= trace`` and ``logdet <= ||F||^2 * trace``."""
        top = self.trace_bound * (1 + slack)
        return bool(np.all(self.mc_logdet_trials <= top)
                    and np.all(self.mc_logdet_trials <= self.sv_trials * top))


def ergodic_capacity_mc(cut: CutInstance, channel: ChannelState, P: float, trials: int, seed: int,
                        with_sv: bool = True, memory_cap: int = DEFAULT_MEMORY_CAP,
                        threads: int = 1) -> CutCapacityEstimate:
    """``E log2 det(I + (P/N) H H^H)`` with the feasible input covariance ``P I``.

    The identity covariance gives a lower estimate of the optimised cut-set
    value; the trace and spectral-norm fields are the analytic upper bounds.
    """
    if trials < 1:
        raise UsageError("need at least one trial")
    _check_memory(cut, memory_cap)
    model = _CutModel(cut, channel)
    ln_snr = math.log(P) - channel.ln_noise
    sum_d = log_sum_exp(model.d_ln)
    trace_bits = math.exp(ln_snr + sum_d.ln_value) / LN2

    def one(t):
        phasors = model.phases(seed, t)
        ld = _logdet_bits(model, phasors, ln_snr)
        sv = _largest_sv_sq(model.f_mag * phasors, 1e-6) if with_sv else math.nan
        return ld, sv

    out = np.array(_map_trials(one, trials, threads))
    sv_est = float(out[:, 1].mean())
    return CutCapacityEstimate(
        mc_logdet=float(out[:, 0].mean()),
        trace_bound=trace_bits,
        sv_bound=sv_est * trace_bits,
        sv_estimate=sv_est,
        trials=trials,
        seed=int(seed),
        sum_d_ln=sum_d,
        mc_logdet_trials=out[:, 0],
        sv_trials=out[:, 1],
    )


@dataclass(frozen=True)
class CutSetBound:
    """Finite-n cut-set bound ``(P/N) sum_i d_i`` and its closed-form envelope."""

    value_ln: LogValue  # nats per channel use
    n_eps_ln: float  # ln n^eps, reported separately
    envelope_ln: LogValue  # c5 * P * sqrt(n) / (a N)

    @property
    def bits(self) -> float:
        return self.value_ln.value / LN2

    @property
    def with_n_eps_ln(self) -> LogValue:
        return LogValue(self.value_ln.ln_value + self.n_eps_ln)


def cut_set_bound(n: int, channel: ChannelState, P: float, epsilon: float = 0.0,
                   c5: float | None = None) -> CutSetBound:
    """Throughput bound for the regular network of ``n`` nodes.

    ``c5`` defaults to ``1 / c0``, the contribution of the destination facing
    each innermost source.
    """
    if channel.ln_a <= 0:
        raise RegimeError("the cut-set bound chain needs a(f) > 1")
    pt = power_transfer_exact(vertical_cut(build_regular(n)), channel, P)
    ln_snr = math.log(P) - channel.ln_noise
    if c5 is None:
        c5 = 1.0 / channel.c0
    env = math.log(c5) + math.log(P) + 0.5 * math.log(n) - channel.ln_a - channel.ln_noise
    return CutSetBound(LogValue(ln_snr + pt.total_ln.ln_value), epsilon * math.log(n), LogValue(env))


theorem1_bound = cut_set_bound
