"""Scenario setup: configuration, geometry, and seeded Rician channel synthesis.

One ChannelSet is a single fading realization of every link in the system:
the energy downlink (BS -> IRS1 -> IoTDs), the hybrid-band uplink
(IoTDs -> IRS2 -> MCR) and the IRS2 -> user leakage paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .exceptions import ConfigError, DomainError, ValidationError

LIGHTSPEED = 3.0e8  # nominal, m/s
BANDS = ("s", "m")  # sub-6 GHz / mmWave

# Internal seed for the once-per-config draw of volumes and weights when the
# document omits them. Fixed so defaults are reproducible across processes.
_TRAFFIC_SEED = 24601


def db2pow(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def _near_square(n: int) -> tuple[int, int]:
    """Most-square factorization m_x*m_y = n with m_x <= m_y."""
    mx = int(math.isqrt(n))
    while n % mx:
        mx -= 1
    return mx, n // mx


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar array layout: element counts per axis and spacings in meters."""

    m_x: int
    m_y: int
    d_x: float
    d_y: float

    @property
    def size(self) -> int:
        return self.m_x * self.m_y


@dataclass(frozen=True)
class TrainState:
    """Train kinematics for one slot.

    position is the signed track coordinate in meters (0 = closest approach
    to the IoTD cluster), phi_d / phi_c the horizontal angles of the direct
    and cascaded links relative to the velocity vector.
    """

    position: float
    v_speed: float  # m/s
    slot_dt: float  # s
    phi_d: float  # rad, in [0, 2pi)
    phi_c: float  # rad, in [0, 2pi)

    def __post_init__(self):
        if self.v_speed < 0:
            raise ValidationError("TrainState invariant v_speed >= 0 violated")
        if self.slot_dt <= 0:
            raise ValidationError("TrainState invariant slot_dt > 0 violated")
        object.__setattr__(self, "phi_d", float(np.mod(self.phi_d, 2 * np.pi)))
        object.__setattr__(self, "phi_c", float(np.mod(self.phi_c, 2 * np.pi)))

    @classmethod
    def at_position(cls, position: float, v_speed: float, slot_dt: float,
                    track_offset: float = 1.0) -> "TrainState":
        """Planar layout: track along x, IoTD cluster at (0, track_offset)."""
        phi = math.atan2(track_offset, -position)
        return cls(position, v_speed, slot_dt, phi, phi)

    @property
    def iotd_distance(self) -> float:
        """Train-to-IoTD range for the assumed 1-offset planar layout (m)."""
        return math.hypot(self.position, 1.0)


# Mandatory distance keys, meters. d_H: BS->IRS1, d_hd: BS->IoTD,
# d_hr: IRS1->IoTD, d_gr: IoTD->IRS2, d_gd: IoTD->MCR, d_G: IRS2->MCR,
# d_d: IRS2->user.
DISTANCE_KEYS = ("d_H", "d_hd", "d_hr", "d_gr", "d_gd", "d_G", "d_d")


@dataclass
class SystemConfig:
    m1: int = 25  # BS antennas
    m2: int = 9  # MCR antennas
    n1: int = 100  # IRS1 elements
    n2: int = 100  # IRS2 elements
    num_iotds: int = 3
    num_users: int = 3  # potential eavesdroppers on the train
    f_s: float = 3.5e9  # Hz
    f_m: float = 28e9  # Hz
    b_s: float = 10e6  # Hz
    b_m: float = 80e6  # Hz
    p_max: float = 10.0  # W
    xi: float = 0.8  # energy conversion efficiency
    kappa: float = 6.0  # Rician factor
    rho0_db: float = -20.0  # reference path gain at d0
    d0: float = 1.0  # m
    alpha_ref: float = 2.2  # exponent, reflected hops
    alpha_dir: float = 3.5  # exponent, direct links
    noise_psd_dbm_hz: float = -174.0
    distances: dict = field(default_factory=lambda: {
        "d_H": 10.0, "d_hd": 10.0, "d_hr": 5.0, "d_gr": 9.0,
        "d_gd": 10.0, "d_G": 2.0, "d_d": 7.0})
    volumes: np.ndarray | None = None  # bits, per IoTD
    weights: np.ndarray | None = None  # positive, per IoTD
    eaves_zod: float = 3 * np.pi / 4  # user LoS zenith of departure
    eaves_zoa: float = np.pi / 4  # user LoS zenith of arrival
    array_geometry: dict = field(default_factory=dict)  # bs/irs1/irs2/mcr
    n_rand: int = 200  # Gaussian randomization samples
    eps1: float = 1e-6  # inner-loop multiplier residual
    eps2: float = 1e-2  # outer-loop relative objective change
    eps_dca: float = 1e-4
    eps_sdp: float = 1e-3
    eps_leak: float = 1e-2  # covert budget relative to per-constraint scale
    t_max: int = 10
    t_dca_max: int = 50
    delta: float = 0.5  # modified-Newton backtracking base
    epsilon_newton: float = 0.1  # modified-Newton sufficient-decrease factor
    sdp_max_iter: int = 4000
    theta1_grid: int = 16  # phase levels per coordinate sweep
    theta1_refine_tol: float = 1e-3  # rad
    v_speed: float = 110.0  # m/s, train sweeps
    slot_dt: float = 1e-3  # s
    pilot_overhead: float = 600.0  # symbols per coherence block
    f_floor: float = 1e-3  # Hz, coherence-time guard
    track_offset: float = 1.0  # m, IoTD perpendicular offset from the track

    def __post_init__(self):
        rng = np.random.default_rng(_TRAFFIC_SEED)
        if self.volumes is None:
            self.volumes = rng.uniform(1e6, 2e6, self.num_iotds)  # 1000..2000 kb
        else:
            rng.uniform(1e6, 2e6, self.num_iotds)  # keep the weight draw aligned
        self.volumes = np.asarray(self.volumes, dtype=float)
        if self.weights is None:
            self.weights = 1.0 - rng.random(self.num_iotds)  # uniform on (0, 1]
        self.weights = np.asarray(self.weights, dtype=float)
        defaults = {
            "bs": (self.m1, self.wavelength("s") / 2),
            "irs1": (self.n1, self.wavelength("s") / 2),
            "irs2": (self.n2, self.wavelength("m") / 2),
            "mcr": (self.m2, self.wavelength("m") / 2),
        }
        for name, (count, spacing) in defaults.items():
            if name not in self.array_geometry:
                mx, my = _near_square(count)
                self.array_geometry[name] = ArrayGeometry(mx, my, spacing, spacing)
        self.validate()

    def wavelength(self, band: str) -> float:
        return LIGHTSPEED / (self.f_s if band == "s" else self.f_m)

    def sigma2(self, band: str) -> float:
        """Noise variance, W: PSD (dBm/Hz -> W/Hz) times band bandwidth."""
        bw = self.b_s if band == "s" else self.b_m
        return db2pow(self.noise_psd_dbm_hz - 30.0) * bw

    def bandwidth(self, band: str) -> float:
        return self.b_s if band == "s" else self.b_m

    def validate(self):
        checks = [
            (self.p_max > 0, "p_max > 0"),
            (0 < self.xi <= 1, "0 < xi <= 1"),
            (self.kappa >= 0, "kappa >= 0"),
            (self.m1 >= 1 and self.m2 >= 1, "antenna counts >= 1"),
            (self.n1 >= 1 and self.n2 >= 1, "element counts >= 1"),
            (self.num_iotds >= 1 and self.num_users >= 1, "device counts >= 1"),
            (self.f_s > 0 and self.f_m > 0 and self.b_s > 0 and self.b_m > 0,
             "frequencies and bandwidths > 0"),
            (self.d0 > 0, "d0 > 0"),
            (all(self.distances.get(k, 0) > 0 for k in DISTANCE_KEYS),
             "all distances > 0"),
            (np.all(self.volumes > 0), "all v_l > 0"),
            (np.all(self.weights > 0), "all weights > 0"),
            (len(self.volumes) == self.num_iotds, "len(volumes) == num_iotds"),
            (len(self.weights) == self.num_iotds, "len(weights) == num_iotds"),
            (0 < self.delta < 1, "delta in (0,1)"),
            (0 < self.epsilon_newton < 1, "epsilon_newton in (0,1)"),
            (self.n_rand >= 1, "n_rand >= 1"),
            (self.t_max >= 0, "t_max >= 0"),
        ]
        for ok, name in checks:
            if not ok:
                raise ValidationError(f"config invariant violated: {name}")
        for name, count in (("bs", self.m1), ("irs1", self.n1),
                            ("irs2", self.n2), ("mcr", self.m2)):
            geo = self.array_geometry[name]
            if geo.size != count:
                raise ValidationError(
                    f"config invariant violated: {name} M_x*M_y = "
                    f"{geo.size} != declared count {count}")

    def with_counts(self, **kw) -> "SystemConfig":
        """Copy with changed element/antenna counts; geometry re-derived.

        Changing num_iotds redraws the traffic profile at the new size."""
        overrides = dict(kw)
        if overrides.get("num_iotds", self.num_iotds) != self.num_iotds:
            overrides.setdefault("volumes", None)
            overrides.setdefault("weights", None)
        else:
            overrides.setdefault("volumes", self.volumes.copy())
            overrides.setdefault("weights", self.weights.copy())
        return replace(self, array_geometry={},
                       distances=dict(self.distances), **overrides)


# Keys that map one-to-one onto SystemConfig attributes.
_SCALAR_KEYS = {
    "m1": int, "m2": int, "n1": int, "n2": int, "num_iotds": int,
    "num_users": int, "f_s": float, "f_m": float, "b_s": float, "b_m": float,
    "p_max": float, "xi": float, "kappa": float, "rho0_db": float,
    "d0": float, "alpha_ref": float, "alpha_dir": float,
    "noise_psd_dbm_hz": float, "eaves_zod": float, "eaves_zoa": float,
    "n_rand": int, "eps1": float, "eps2": float, "eps_dca": float,
    "eps_sdp": float, "eps_leak": float, "t_max": int, "t_dca_max": int,
    "delta": float, "epsilon_newton": float, "sdp_max_iter": int,
    "theta1_grid": int, "theta1_refine_tol": float, "v_speed": float,
    "slot_dt": float, "pilot_overhead": float, "f_floor": float,
    "track_offset": float,
}


def load_config(source) -> SystemConfig:
    """Build a validated SystemConfig from a flat key-value document.

    source may be a path to a YAML file, a YAML string, or an already
    parsed mapping. Unknown keys are rejected so typos surface early.
    """
    if isinstance(source, SystemConfig):
        return source
    if isinstance(source, dict):
        doc = dict(source)
    else:
        text = source
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, TypeError):
            pass  # treat source as literal YAML text
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse failure: {exc}") from exc
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a flat key-value mapping")

    kwargs = {}
    distances = dict(SystemConfig().distances)
    for key, value in doc.items():
        if key in _SCALAR_KEYS:
            try:
                kwargs[key] = _SCALAR_KEYS[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: bad value {value!r}") from exc
        elif key in DISTANCE_KEYS:
            distances[key] = float(value)
        elif key in ("volumes", "weights"):
            kwargs[key] = np.asarray(value, dtype=float)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    kwargs["distances"] = distances
    return SystemConfig(**kwargs)


def path_loss(distance: float, exponent: float, rho0_db: float = -20.0,
              d0: float = 1.0) -> float:
    """Linear power gain rho0 * (d/d0)^-exponent."""
    if distance <= 0:
        raise DomainError(f"path_loss requires d > 0, got {distance}")
    return db2pow(rho0_db) * (distance / d0) ** (-exponent)


def array_response(geometry: ArrayGeometry, theta1: float, theta2: float,
                   wavelength: float) -> np.ndarray:
    """Planar response a_x(theta1,theta2) kron a_y(theta1,theta2).

    theta1/theta2 follow the a_x: sin(t1)cos(t2), a_y: sin(t1)sin(t2)
    phase convention. Every entry has unit magnitude.
    """
    if geometry.m_x < 1 or geometry.m_y < 1:
        raise DomainError("array_response requires counts >= 1")
    if wavelength <= 0:
        raise DomainError("array_response requires wavelength > 0")
    kx = 2 * np.pi * geometry.d_x / wavelength * np.sin(theta1) * np.cos(theta2)
    ky = 2 * np.pi * geometry.d_y / wavelength * np.sin(theta1) * np.sin(theta2)
    a_x = np.exp(1j * kx * np.arange(geometry.m_x))
    a_y = np.exp(1j * ky * np.arange(geometry.m_y))
    return np.kron(a_x, a_y)


@dataclass
class ChannelSet:
    """One seeded realization of every channel, shapes tied to SystemConfig.

    Uplink members are dicts keyed by band ("s"/"m").
    """

    H: np.ndarray  # N1 x M1, BS -> IRS1
    h_r: np.ndarray  # L x N1, IRS1 -> IoTD
    h_d: np.ndarray  # L x M1, BS -> IoTD
    G: dict  # band -> M2 x N2, IRS2 -> MCR
    g_r: dict  # band -> L x N2, IoTD -> IRS2
    g_d: dict  # band -> L x M2, IoTD -> MCR
    d_eaves: dict  # band -> K x N2, IRS2 -> user
    seed: int


def _rician(rng, los: np.ndarray, kappa: float, gain: float) -> np.ndarray:
    """sqrt(gain) * (sqrt(k/(k+1)) LoS + sqrt(1/(k+1)) NLoS), CN(0,1) NLoS."""
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape))
    nlos /= math.sqrt(2.0)
    if np.isinf(kappa):
        mixed = los
    else:
        mixed = math.sqrt(kappa / (kappa + 1)) * los + math.sqrt(1 / (kappa + 1)) * nlos
    return math.sqrt(gain) * mixed


def build_channel_set(config: SystemConfig, train_state: TrainState | None = None,
                      rng_seed: int = 0) -> ChannelSet:
    """Synthesize one deterministic channel realization for a seed.

    LoS terms come from array_response outer products with uniformly drawn
    angles; user links pin the zenith pair (eaves_zod, eaves_zoa). With a
    TrainState, d_gr and d_gd follow the train-to-IoTD range instead of the
    static Table values.
    """
    rng = np.random.default_rng(rng_seed)
    L, K = config.num_iotds, config.num_users
    geo = config.array_geometry
    lam_s = config.wavelength("s")
    dist = dict(config.distances)
    if train_state is not None:
        dist["d_gr"] = dist["d_gd"] = max(train_state.iotd_distance, 1e-6)

    def pl(key, exponent):
        return path_loss(dist[key], exponent, config.rho0_db, config.d0)

    def angles(n=2):
        return rng.uniform(0.0, 2 * np.pi, n)

    def resp(name, lam, zenith=None):
        t1, t2 = angles()
        if zenith is not None:
            t2 = zenith
        return array_response(geo[name], t1, t2, lam)

    # Downlink, sub-6 wavelength throughout.
    los_H = np.outer(resp("irs1", lam_s), resp("bs", lam_s).conj())
    H = _rician(rng, los_H, config.kappa, pl("d_H", config.alpha_ref))
    h_r = np.stack([_rician(rng, resp("irs1", lam_s).conj(), config.kappa,
                            pl("d_hr", config.alpha_ref)) for _ in range(L)])
    h_d = np.stack([_rician(rng, resp("bs", lam_s).conj(), config.kappa,
                            pl("d_hd", config.alpha_dir)) for _ in range(L)])

    G, g_r, g_d, d_eaves = {}, {}, {}, {}
    for band in BANDS:
        lam = config.wavelength(band)
        los_G = np.outer(resp("mcr", lam), resp("irs2", lam).conj())
        G[band] = _rician(rng, los_G, config.kappa, pl("d_G", config.alpha_ref))
        g_r[band] = np.stack([_rician(rng, resp("irs2", lam), config.kappa,
                                      pl("d_gr", config.alpha_ref))
                              for _ in range(L)])
        g_d[band] = np.stack([_rician(rng, resp("mcr", lam), config.kappa,
                                      pl("d_gd", config.alpha_dir))
                              for _ in range(L)])
        # User links: zenith of departure pinned, azimuth random per user.
        d_eaves[band] = np.stack([
            _rician(rng, resp("irs2", lam, zenith=config.eaves_zod).conj(),
                    config.kappa, pl("d_d", config.alpha_ref))
            for _ in range(K)])

    return ChannelSet(H=H, h_r=h_r, h_d=h_d, G=G, g_r=g_r, g_d=g_d,
                      d_eaves=d_eaves, seed=rng_seed)
