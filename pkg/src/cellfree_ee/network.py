"""Network geometry and large-scale channel-estimation statistics.

Access points and users are dropped uniformly at random on a D x D square
with wrap-around distances.  Large-scale fading follows a three-slope path
loss with log-normal shadowing beyond the far breakpoint.  From the fading
coefficients and the pilot assignment, the module computes the MMSE
estimation scaling ``c`` and the per-antenna estimate power ``gamma`` that
drive the closed-form performance model.
"""

from dataclasses import dataclass, field

import numpy as np

BOLTZMANN = 1.380649e-23


@dataclass(frozen=True)
class PathLossParams:
    """Three-slope path-loss constants (Hata-COST231 style beyond d1)."""

    carrier_mhz: float = 1900.0
    ap_height_m: float = 15.0
    user_height_m: float = 1.65
    d0_km: float = 0.01
    d1_km: float = 0.05
    shadow_sigma_db: float = 8.0

    def fixed_loss_db(self) -> float:
        lf = np.log10(self.carrier_mhz)
        return (46.3 + 33.9 * lf - 13.82 * np.log10(self.ap_height_m)
                - (1.1 * lf - 0.7) * self.user_height_m + (1.56 * lf - 0.8))


@dataclass
class SystemParams:
    """All scenario scalars for one system instance.

    ``rho`` and ``p_p`` are SNRs normalized by the noise power
    (transmit power / noise_power_w); ``p_max`` and ``s_req`` are per-user
    arrays of length K.
    """

    M: int = 100                 # access points
    N: int = 1                   # antennas per AP
    K: int = 20                  # users
    D_km: float = 1.0            # square side
    tau_p: int = 20              # pilot length, symbols
    tau_c: int = 200             # coherence interval, samples
    T_c: float = 1e-3            # coherence time, seconds
    rho: float = 1.0             # normalized uplink SNR
    p_p: float = 1.0             # normalized pilot SNR
    bandwidth_hz: float = 20e6
    zeta: float = 0.3            # PA efficiency
    noise_power_w: float = 1.0
    P_fix: float = 0.825         # per-AP fixed power, W
    P_U: float = 0.1             # per-user circuit power, W
    P_BT: float = 1.0            # backhaul traffic power at full capacity, W
    C_bh: float = 100e6          # backhaul capacity, bit/s
    alpha: int = 2               # quantization bits
    p_max: np.ndarray = None     # per-user max normalized power
    s_req: np.ndarray = None     # per-user required SE, bit/s/Hz
    pathloss: PathLossParams = field(default_factory=PathLossParams)

    def __post_init__(self):
        if self.p_max is None:
            self.p_max = np.ones(self.K)
        else:
            self.p_max = np.broadcast_to(np.asarray(self.p_max, float), (self.K,)).copy()
        if self.s_req is None:
            self.s_req = np.zeros(self.K)
        else:
            self.s_req = np.broadcast_to(np.asarray(self.s_req, float), (self.K,)).copy()

    @property
    def tau_f(self) -> int:
        return self.tau_c - self.tau_p

    def validate(self) -> None:
        problems = []
        if min(self.M, self.N, self.K) < 1:
            problems.append("M, N, K must all be >= 1")
        if not 0 < self.tau_p < self.tau_c:
            problems.append(f"need 0 < tau_p < tau_c, got tau_p={self.tau_p}, tau_c={self.tau_c}")
        for name in ("D_km", "T_c", "rho", "p_p", "bandwidth_hz", "noise_power_w",
                     "P_fix", "P_U", "C_bh"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.P_BT < 0:
            problems.append("P_BT must be nonnegative")
        if not 0 < self.zeta <= 1:
            problems.append(f"zeta must lie in (0, 1], got {self.zeta}")
        if not 1 <= self.alpha <= 7:
            problems.append(f"alpha must lie in 1..7, got {self.alpha}")
        if np.any(self.p_max <= 0):
            problems.append("p_max entries must be positive")
        if np.any(self.s_req < 0):
            problems.append("s_req entries must be nonnegative")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class NetworkStats:
    """Large-scale quantities of one network realization.

    beta, c, gamma are M x K; pilot_gram is the K x K matrix of squared pilot
    inner products |phi_k^H phi_k'|^2.
    """

    beta: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    pilot_gram: np.ndarray
    seed: int


def noise_power(bandwidth_hz: float, noise_figure_db: float,
                temperature_k: float = 290.0) -> float:
    """Thermal noise power in Watt: k_B * T * B * NF."""
    if bandwidth_hz <= 0 or temperature_k <= 0:
        raise ValueError("bandwidth and temperature must be positive")
    return bandwidth_hz * BOLTZMANN * temperature_k * 10.0 ** (noise_figure_db / 10.0)


def assign_pilots(K: int, tau_p: int, seed) -> np.ndarray:
    """Squared pilot correlation matrix |phi_k^H phi_k'|^2 of shape (K, K).

    With tau_p >= K every user gets its own orthonormal sequence (identity
    gram).  Otherwise each user picks one of tau_p orthonormal sequences
    uniformly at random, so entries are exactly 0 or 1.
    """
    if tau_p < 1:
        raise ValueError(f"tau_p must be >= 1, got {tau_p}")
    if tau_p >= K:
        return np.eye(K)
    rng = np.random.Generator(np.random.Philox(seed))
    idx = rng.integers(0, tau_p, size=K)
    return (idx[:, None] == idx[None, :]).astype(float)


def estimation_stats(beta: np.ndarray, pilot_gram: np.ndarray,
                     p_p: float, tau_p: int) -> tuple[np.ndarray, np.ndarray]:
    """MMSE estimation coefficients (c, gamma) from large-scale fading.

    c_mk = sqrt(tau_p p_p) beta_mk / (tau_p p_p sum_k' beta_mk' |phi_k^H phi_k'|^2 + 1)
    gamma_mk = sqrt(tau_p p_p) beta_mk c_mk
    """
    beta = np.asarray(beta, float)
    snr = tau_p * p_p
    denom = snr * (beta @ pilot_gram.T) + 1.0
    c = np.sqrt(snr) * beta / denom
    gamma = np.sqrt(snr) * beta * c
    return c, gamma


def _wraparound_distances(ap_xy: np.ndarray, user_xy: np.ndarray, D: float) -> np.ndarray:
    diff = np.abs(ap_xy[:, None, :] - user_xy[None, :, :])
    diff = np.minimum(diff, D - diff)
    return np.sqrt(np.sum(diff ** 2, axis=2))


def three_slope_loss_db(d_km: np.ndarray, pl: PathLossParams) -> np.ndarray:
    """Path loss in dB (negative gain) for distances in km."""
    d = np.asarray(d_km, float)
    L = pl.fixed_loss_db()
    far = -L - 35.0 * np.log10(np.maximum(d, pl.d0_km))
    mid = -L - 15.0 * np.log10(pl.d1_km) - 20.0 * np.log10(np.maximum(d, pl.d0_km))
    near = -L - 15.0 * np.log10(pl.d1_km) - 20.0 * np.log10(pl.d0_km)
    out = np.where(d <= pl.d0_km, near, np.where(d <= pl.d1_km, mid, far))
    return out


def generate_network(params: SystemParams, seed: int) -> NetworkStats:
    """Draw one network realization and compute its large-scale statistics.

    All randomness derives from ``seed`` through a splittable counter-based
    generator: identical (params, seed) pairs reproduce identical outputs.
    Shadowing applies only beyond the far path-loss breakpoint.
    """
    params.validate()
    root = np.random.SeedSequence(seed)
    ss_ap, ss_user, ss_shadow, ss_pilot = root.spawn(4)
    rng_ap = np.random.Generator(np.random.Philox(ss_ap))
    rng_user = np.random.Generator(np.random.Philox(ss_user))
    rng_shadow = np.random.Generator(np.random.Philox(ss_shadow))

    D = params.D_km
    ap_xy = rng_ap.uniform(0.0, D, size=(params.M, 2))
    user_xy = rng_user.uniform(0.0, D, size=(params.K, 2))
    dist = _wraparound_distances(ap_xy, user_xy, D)

    loss_db = three_slope_loss_db(dist, params.pathloss)
    shadow = rng_shadow.standard_normal((params.M, params.K))
    loss_db = loss_db + np.where(dist > params.pathloss.d1_km,
                                 params.pathloss.shadow_sigma_db * shadow, 0.0)
    beta = 10.0 ** (loss_db / 10.0)

    pilot_gram = assign_pilots(params.K, params.tau_p, ss_pilot)
    c, gamma = estimation_stats(beta, pilot_gram, params.p_p, params.tau_p)
    return NetworkStats(beta=beta, c=c, gamma=gamma, pilot_gram=pilot_gram, seed=seed)


def default_system_params(noise_figure_db: float = 9.0, pilot_power_w: float = 0.2,
                          data_power_w: float = 1.0, **overrides) -> SystemParams:
    """SystemParams with physical defaults: normalized SNRs from the noise power."""
    bandwidth = overrides.pop("bandwidth_hz", 20e6)
    p_n = noise_power(bandwidth, noise_figure_db)
    return SystemParams(bandwidth_hz=bandwidth, noise_power_w=p_n,
                        rho=data_power_w / p_n, p_p=pilot_power_w / p_n,
                        **overrides)
