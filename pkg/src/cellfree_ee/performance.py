"""Closed-form SINR / spectral-efficiency model and the power / energy model.

The per-user uplink SINR is a ratio of quadratic forms in the receiver filter
u_k built from four ingredient matrices: the rank-one desired-signal term in
gamma_k, the pilot-contamination vectors Delta_kk', and two diagonal families
D_kk' (beamforming uncertainty + interference + quantization cross terms) and
R_k (noise + quantization of the estimate).  The fronthaul quantizer enters
only through distortion_power / gain^2 of its Bussgang decomposition.
"""

from dataclasses import dataclass

import numpy as np

from .network import NetworkStats, SystemParams
from .quantizer import QuantizerSpec


@dataclass(frozen=True)
class SinrMatrices:
    """Per-user ingredients of the SINR quadratic forms.

    gamma_k: (M,) estimate powers for this user.
    delta:   (M, K) column k' holds gamma_mk * beta_mk' / beta_mk
             (used only for k' != k, weighted by the pilot gram).
    d:       (M, K) column k' holds the diagonal of D_kk'.
    r:       (M,) diagonal of R_k.
    pilot_row: (K,) squared pilot correlations of this user against all users.
    """

    user: int
    gamma_k: np.ndarray
    delta: np.ndarray
    d: np.ndarray
    r: np.ndarray
    pilot_row: np.ndarray


def quantization_penalty(spec: QuantizerSpec) -> float:
    """distortion_power / gain^2, the factor by which quantization inflates noise."""
    return spec.distortion_power / spec.gain ** 2


def build_sinr_matrices(stats: NetworkStats, spec: QuantizerSpec, k: int) -> SinrMatrices:
    """Assemble the four matrix families for user k.

    Entries with beta_mk == 0 contribute zero to delta (continuous extension:
    gamma_mk vanishes there first).
    """
    beta, gamma = stats.beta, stats.gamma
    pen = quantization_penalty(spec)
    gamma_k = gamma[:, k]
    beta_k = beta[:, k]
    ratio = np.divide(gamma_k, beta_k, out=np.zeros_like(gamma_k), where=beta_k > 0)
    delta = ratio[:, None] * beta
    d = beta * (pen * (2.0 * beta_k - gamma_k) + gamma_k)[:, None]
    r = (pen + 1.0) * gamma_k
    return SinrMatrices(user=k, gamma_k=gamma_k, delta=delta, d=d, r=r,
                        pilot_row=stats.pilot_gram[k])


def sinr(k: int, q: np.ndarray, u_k: np.ndarray, mats: SinrMatrices,
         rho: float, N: int) -> float:
    """Per-user SINR as a ratio of quadratic forms in the filter u_k.

    Scale-invariant in u_k.  The rank-one numerator and contamination terms
    are evaluated as squared dot products, never materialized as matrices.
    """
    u_k = np.asarray(u_k, float)
    if not np.any(u_k):
        raise ValueError("filter u_k must be nonzero")
    q = np.asarray(q, float)
    u_sq = u_k ** 2
    num = N ** 2 * q[k] * np.dot(u_k, mats.gamma_k) ** 2
    contam = mats.pilot_row * q * np.square(u_k @ mats.delta)
    contam[k] = 0.0
    den = (N ** 2 * np.sum(contam)
           + N * np.dot(u_sq @ mats.d, q)
           + (N / rho) * np.dot(u_sq, mats.r))
    return float(num / den)


def spectral_efficiency(sinr_value, tau_p: int, tau_c: int):
    """Achievable SE in bit/s/Hz with the pilot-overhead prelog."""
    if not 0 < tau_p < tau_c:
        raise ValueError(f"need 0 < tau_p < tau_c, got {tau_p}, {tau_c}")
    return (1.0 - tau_p / tau_c) * np.log2(1.0 + np.asarray(sinr_value, float))


def sinr_all(q: np.ndarray, U: np.ndarray, stats: NetworkStats,
             spec: QuantizerSpec, params: SystemParams) -> np.ndarray:
    """SINR of every user for filters U (columns) and powers q."""
    return np.array([
        sinr(k, q, U[:, k], build_sinr_matrices(stats, spec, k), params.rho, params.N)
        for k in range(params.K)
    ])


def backhaul_rate(K: int, tau_f: int, alpha: int, T_c: float) -> float:
    """Fronthaul rate per AP in bit/s: 2 K tau_f alpha / T_c."""
    if tau_f <= 0 or T_c <= 0:
        raise ValueError("tau_f and T_c must be positive")
    return 2.0 * K * tau_f * alpha / T_c


def backhaul_feasible(params: SystemParams, alpha: int) -> bool:
    """Whether the per-AP fronthaul rate fits the link capacity."""
    return backhaul_rate(params.K, params.tau_f, alpha, params.T_c) <= params.C_bh


def total_power(q: np.ndarray, params: SystemParams, alpha: int) -> float:
    """Total consumed power in Watt.

    PA power (1/zeta) rho N0 sum(q) plus fixed AP power, user circuit power,
    and fronthaul traffic power M P_BT R_bh / C_bh.  Capacity overruns are not
    an error here; check backhaul_feasible separately.
    """
    q = np.asarray(q, float)
    if np.any(q < 0):
        raise ValueError("powers must be nonnegative")
    p_tx = params.rho * params.noise_power_w * float(np.sum(q)) / params.zeta
    r_bh = backhaul_rate(params.K, params.tau_f, alpha, params.T_c)
    p_bh = params.M * params.P_BT * r_bh / params.C_bh
    return p_tx + params.M * params.P_fix + params.K * params.P_U + p_bh


def energy_efficiency(q: np.ndarray, U: np.ndarray, alpha: int,
                      params: SystemParams, stats: NetworkStats,
                      spec: QuantizerSpec) -> float:
    """Total energy efficiency in bit/Joule: bandwidth * sum SE / total power."""
    se = spectral_efficiency(sinr_all(q, U, stats, spec, params),
                             params.tau_p, params.tau_c)
    return params.bandwidth_hz * float(np.sum(se)) / total_power(q, params, alpha)


@dataclass(frozen=True)
class SolutionState:
    """A feasibility-checked operating point: powers, filters, and its metrics."""

    q: np.ndarray
    U: np.ndarray
    sinr: np.ndarray
    se: np.ndarray
    sum_se: float
    ee: float

    def feasibility_report(self, params: SystemParams, budget: float | None = None,
                           tol: float = 1e-6) -> dict:
        report = {
            "power_box": bool(np.all(self.q >= -tol) and np.all(self.q <= params.p_max + tol)),
            "se_targets": bool(np.all(self.se >= params.s_req - tol)),
            "unit_filters": bool(np.allclose(np.linalg.norm(self.U, axis=0), 1.0, atol=1e-9)),
        }
        if budget is not None:
            report["budget"] = bool(np.sum(self.q) <= budget + tol)
        report["feasible"] = all(report.values())
        return report


def evaluate_solution(q: np.ndarray, U: np.ndarray, params: SystemParams,
                      stats: NetworkStats, spec: QuantizerSpec) -> SolutionState:
    """Evaluate (q, U) through the closed-form model into a SolutionState."""
    s = sinr_all(q, U, stats, spec, params)
    se = spectral_efficiency(s, params.tau_p, params.tau_c)
    ee = params.bandwidth_hz * float(np.sum(se)) / total_power(q, params, params.alpha)
    return SolutionState(q=np.array(q, float), U=np.array(U, float), sinr=s, se=se,
                         sum_se=float(np.sum(se)), ee=ee)
