"""Flat key=value study configuration with typed validation and hashing.

A study config embeds the full simulation problem plus the study-specific
sweep parameters.  The config hash is a SHA-256 digest of the canonicalized
text (sorted ``key = value`` lines, comments stripped) and identifies runs
in manifests.
"""
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .lattice import Box, Field, TorusGrid, make_weights
from .noise import ControlPath
from .solver import CoefficientSet, ScalarFn, SimConfig
from .wavekernel import InitialData, check_exponents

__all__ = ["StudyConfig", "ConfigError", "parse_config_text", "load_study_config",
           "config_hash", "STUDY_TAGS"]

STUDY_TAGS = (
    "simulate",
    "wz",
    "increments",
    "sup-convergence",
    "rate",
    "kernel-bounds",
    "sobolev-moments",
    "skeleton-check",
    "params",
)

_DEFAULTS = {
    "study": "simulate",
    "L": "4.0",
    "N": "32",
    "beta": "1.0",
    "T": "1.0",
    "q": "10",
    "n": "3",
    "n_list": "3,4,5,6,7",
    "k_max": "4",
    "M": "100",
    "seed": "0",
    "alpha": "1.4",
    "K_lo": "1.5",
    "K_hi": "2.5",
    "t0": "0.5",
    "rho": "0.3",
    "gamma": "0.05",
    "p": "4",
    "lambda": "median",
    "A": "affine:1.0,0.0",
    "B": "affine:0.0,0.0",
    "D": "affine:0.0,0.0",
    "b": "affine:0.0,0.0",
    "initial": "zero",
    "control": "zero",
    "out": "out",
    "format": "csv",
    "threads": "1",
}


class ConfigError(ValueError):
    """Invalid or inadmissible study configuration."""


def parse_config_text(text):
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def config_hash(pairs):
    canon = "\n".join(f"{k} = {pairs[k]}" for k in sorted(pairs)) + "\n"
    return hashlib.sha256(canon.encode()).hexdigest()


def _scalar_fn(spec):
    try:
        kind, _, args = spec.partition(":")
        vals = [float(s) for s in args.split(",")] if args else []
        if kind == "affine":
            return ScalarFn.affine(*vals)
        if kind == "sine":
            return ScalarFn.sine(*vals)
        if kind in ("clipped", "clipped-linear"):
            return ScalarFn.clipped_linear(*vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad coefficient descriptor {spec!r}: {exc}") from None
    raise ConfigError(f"unknown coefficient kind in {spec!r}")


@dataclass
class StudyConfig:
    """Typed view of a study configuration."""

    pairs: dict
    study: str = field(init=False)

    def __post_init__(self):
        merged = dict(_DEFAULTS)
        unknown = set(self.pairs) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(self.pairs)
        self.pairs = merged
        self.study = merged["study"]
        if self.study not in STUDY_TAGS:
            raise ConfigError(f"unknown study tag {self.study!r}")
        try:
            self.L = float(merged["L"])
            self.N = int(merged["N"])
            self.beta = float(merged["beta"])
            self.T = float(merged["T"])
            self.q = int(merged["q"])
            self.n = int(merged["n"])
            self.n_list = tuple(int(s) for s in merged["n_list"].split(","))
            self.k_max = int(merged["k_max"])
            self.M = int(merged["M"])
            self.seed = int(merged["seed"])
            self.alpha = float(merged["alpha"])
            self.K_lo = float(merged["K_lo"])
            self.K_hi = float(merged["K_hi"])
            self.t0 = float(merged["t0"])
            self.rho = float(merged["rho"])
            self.gamma = float(merged["gamma"])
            self.p = float(merged["p"])
            self.threads = int(merged["threads"])
        except ValueError as exc:
            raise ConfigError(f"bad numeric value: {exc}") from None
        self.lam = merged["lambda"]
        if self.lam != "median":
            try:
                self.lam = float(self.lam)
            except ValueError:
                raise ConfigError("lambda must be a number or 'median'") from None
        self.out = merged["out"]
        self.format = merged["format"]
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if list(self.n_list) != sorted(self.n_list):
            raise ConfigError("n_list must be ascending")
        self.coefficients = CoefficientSet(
            A=_scalar_fn(merged["A"]),
            B=_scalar_fn(merged["B"]),
            D=_scalar_fn(merged["D"]),
            b=_scalar_fn(merged["b"]),
        )
        self._validate_study()

    @property
    def hash(self):
        return config_hash(self.pairs)

    def _validate_study(self):
        if self.study in ("wz",):
            if not self.coefficients.B.is_affine:
                raise ConfigError(
                    "wz study requires an affine B coefficient "
                    "(smoothed-noise convergence hypothesis)"
                )
        if self.study == "skeleton-check":
            if not self.coefficients.D.is_affine:
                raise ConfigError(
                    "skeleton-check requires an affine noise coefficient "
                    "(support-characterization hypothesis h1)"
                )
        if self.study in ("wz", "increments", "sup-convergence"):
            g1, g2 = self._initial_exponents()
            bound = min(g1, g2, (2.0 - self.beta) / 2.0)
            if not 0.0 < self.rho < bound:
                raise ConfigError(
                    f"Hölder study requires 0 < rho < min(gamma1, gamma2, "
                    f"(2-beta)/2) = {bound:.4g}; got rho={self.rho}"
                )
        if self.study == "sobolev-moments":
            report = check_exponents(self.beta, self.p, self.gamma)
            p_min = max(6.0, 2.0 * (4.0 - self.beta)) / (2.0 - self.beta)
            if self.p <= p_min:
                raise ConfigError(
                    f"sobolev-moments requires p > (6 v 2(4-beta))/(2-beta) "
                    f"= {p_min:.4g}; got p={self.p}"
                )
            g_max = (2.0 - self.beta) / 2.0 - 3.0 / self.p
            if not 0.0 < self.gamma < g_max:
                raise ConfigError(
                    f"sobolev-moments requires 0 < gamma < (2-beta)/2 - 3/p "
                    f"= {g_max:.4g}; got gamma={self.gamma}"
                )
            del report

    def _initial_exponents(self):
        if self.pairs["initial"] == "zero":
            return (1.0, 1.0)
        return (1.0, 1.0)  # smooth bump data

    # --- factories -------------------------------------------------------

    def grid(self):
        return TorusGrid(self.L, self.N)

    def box(self):
        return Box((self.K_lo,) * 3, (self.K_hi,) * 3)

    def initial_data(self, grid):
        shape = (self.N,) * 3
        spec = self.pairs["initial"]
        if spec == "zero":
            z = Field(grid, np.zeros(shape))
            return InitialData(z, z)
        kind, _, args = spec.partition(":")
        if kind != "bump":
            raise ConfigError(f"unknown initial data {spec!r}")
        try:
            amp, sig, vel = (float(s) for s in args.split(","))
        except ValueError:
            raise ConfigError("initial bump needs amp,sigma,vel") from None
        x = grid.axis()
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        c = self.L / 2.0
        r2 = (X - c) ** 2 + (Y - c) ** 2 + (Z - c) ** 2
        bump = amp * np.exp(-r2 / (2 * sig**2))
        return InitialData(Field(grid, bump), Field(grid, vel * bump))

    def control_path(self, sim):
        spec = self.pairs["control"]
        if spec == "zero":
            return None
        kind, _, args = spec.partition(":")
        if kind != "random":
            raise ConfigError(f"unknown control {spec!r}")
        try:
            n_modes, amp, cseed = args.split(",")
            n_modes, amp, cseed = int(n_modes), float(amp), int(cseed)
        except ValueError:
            raise ConfigError("random control needs n_modes,amp,seed") from None
        rng = np.random.default_rng(cseed)
        h = np.zeros((sim.J, sim.n_steps))
        h[: min(n_modes, sim.J)] = amp * rng.normal(
            size=(min(n_modes, sim.J), sim.n_steps)
        )
        return ControlPath(h, sim.T)

    def sim_config(self, n=None, weights=None):
        grid = self.grid()
        if weights is None:
            weights = make_weights(grid, self.beta)
        sim = SimConfig(
            grid,
            weights,
            self.coefficients,
            self.initial_data(grid),
            self.box(),
            T=self.T,
            q=self.q,
            n=self.n if n is None else n,
            k_max=self.k_max,
            seed=self.seed,
            alpha=self.alpha,
            t0=self.t0,
        )
        sim.control = self.control_path(sim)
        return sim


def load_study_config(path, overrides=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}") from None
    pairs = parse_config_text(text)
    if overrides:
        pairs.update({k: str(v) for k, v in overrides.items()})
    return StudyConfig(pairs)
