"""Periodic velocity fields on the unit cell [0, 1]^n.

Every flow is an immutable :class:`FlowSpec`.  Two-dimensional kinds are
generated by a stream function ``H`` with ``V = (-H_y, H_x)``; the 1D
compressible kind is a bare profile ``v(x)``.  Amplitude scaling ``V -> A V``
is applied by the evaluation functions, never stored in the flow description.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

TWO_PI = 2.0 * np.pi

SHEAR = "shear"
CELLULAR = "cellular"
CATS_EYE = "cats_eye"
COMPRESSIBLE_1D = "compressible1d"
FOURIER_STREAM = "fourier_stream"

KINDS = (SHEAR, CELLULAR, CATS_EYE, COMPRESSIBLE_1D, FOURIER_STREAM)


class NoStreamFunction(ValueError):
    """Raised when a stream function is requested from a 1D flow."""


class ValidationFailure(ValueError):
    """A flow failed :func:`validate`; carries the measured residuals."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__(
            f"flow validation failed: mean residual {report.mean_residual:.3e}, "
            f"divergence residual {report.div_residual:.3e} (tol {report.tol:.1e})"
        )


@dataclass(frozen=True)
class FourierProfile:
    """A 1-periodic scalar ``v(y) = sum a_k cos(2 pi k y) + b_k sin(2 pi k y)``.

    ``terms`` holds ``(k, a_k, b_k)`` triples with integer ``k >= 0``.  A
    ``k = 0`` term contributes the constant ``a_0`` (and makes the profile
    non mean-zero).
    """

    terms: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        clean = []
        for k, a, b in self.terms:
            if int(k) != k or k < 0:
                raise ValueError(f"wavenumber must be a non-negative integer, got {k}")
            clean.append((int(k), float(a), float(b)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def sine(cls, amplitude: float = 1.0, k: int = 1) -> "FourierProfile":
        return cls(((k, 0.0, amplitude),))

    @classmethod
    def zero(cls) -> "FourierProfile":
        return cls(())

    @classmethod
    def parse(cls, text: str) -> "FourierProfile":
        """Parse ``"k a b; k a b; ..."``."""
        terms = []
        for chunk in text.replace("\n", ";").split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.replace(",", " ").split()
            if len(parts) != 3:
                raise ValueError(f"profile term needs 'k a b', got {chunk!r}")
            terms.append((int(parts[0]), float(parts[1]), float(parts[2])))
        return cls(tuple(terms))

    def format(self) -> str:
        return "; ".join(f"{k} {a!r} {b!r}" for k, a, b in self.terms)

    def derivative(self) -> "FourierProfile":
        """The exact derivative as another profile."""
        out = []
        for k, a, b in self.terms:
            if k:
                w = TWO_PI * k
                out.append((k, w * b, -w * a))
        return FourierProfile(tuple(out))

    def __add__(self, other: "FourierProfile") -> "FourierProfile":
        return FourierProfile(self.terms + other.terms)

    def scaled(self, factor: float) -> "FourierProfile":
        return FourierProfile(tuple((k, factor * a, factor * b) for k, a, b in self.terms))

    @property
    def mean(self) -> float:
        return float(sum(a for k, a, _ in self.terms if k == 0))

    @property
    def is_constant(self) -> bool:
        return all(k == 0 or (a == 0.0 and b == 0.0) for k, a, b in self.terms)

    def _sum(self, y, order: int):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for k, a, b in self.terms:
            if k == 0:
                if order == 0:
                    out = out + a
                continue
            w = TWO_PI * k
            c, s = np.cos(w * y), np.sin(w * y)
            # d/dy rotates (a cos + b sin) by 90 degrees and scales by w
            for _ in range(order % 4):
                c, s = -s, c
            out = out + w**order * (a * c + b * s)
        return out

    def __call__(self, y):
        return self._sum(y, 0)

    def deriv(self, y):
        return self._sum(y, 1)

    def deriv2(self, y):
        return self._sum(y, 2)

    def antiderivative(self, y):
        """Periodic antiderivative of the oscillating part (constant term dropped)."""
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for k, a, b in self.terms:
            if k == 0:
                continue
            w = TWO_PI * k
            out = out + (a * np.sin(w * y) - b * np.cos(w * y)) / w
        return out

    def extrema(self, samples: int = 4096) -> tuple[float, float, float, float]:
        """Return ``(min, argmin, max, argmax)`` refined from dense sampling."""
        from scipy.optimize import minimize_scalar

        ys = np.arange(samples) / samples
        vals = self(ys)
        h = 1.0 / samples
        out = []
        for sign, idx in ((1.0, int(np.argmin(vals))), (-1.0, int(np.argmax(vals)))):
            y0 = ys[idx]
            res = minimize_scalar(
                lambda t: sign * float(self(t)),
                bounds=(y0 - h, y0 + h),
                method="bounded",
                options={"xatol": 1e-13},
            )
            y_best, v_best = (res.x, float(self(res.x))) if sign * self(res.x) <= sign * vals[idx] else (y0, float(vals[idx]))
            out.append((v_best, float(np.mod(y_best, 1.0))))
        (vmin, amin), (vmax, amax) = out
        return vmin, amin, vmax, amax

    def max(self) -> float:
        return self.extrema()[2]

    def min(self) -> float:
        return self.extrema()[0]


@dataclass(frozen=True)
class FlowSpec:
    """Analytic descriptor of a periodic velocity field.

    Use the classmethod constructors rather than building one by hand.
    ``modes`` (fourier_stream only) holds ``((k1, k2), amplitude, phase)``
    entries for ``H = sum amplitude * cos(2 pi k.x + phase)``.  A zero
    wavevector entry stands for a uniform drift
    ``amplitude * (cos phase, sin phase)``, which breaks the mean-zero
    property and is reported as such by :func:`validate`.
    """

    kind: str
    profile: FourierProfile | None = None
    delta: float = 0.0
    modes: tuple[tuple[tuple[int, int], float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown flow kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in (SHEAR, COMPRESSIBLE_1D) and self.profile is None:
            raise ValueError(f"{self.kind} flow needs a profile")
        if self.kind == CATS_EYE and not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"cat's eye delta must lie in [0, 1], got {self.delta}")
        modes = tuple(((int(k[0]), int(k[1])), float(a), float(ph)) for k, a, ph in self.modes)
        object.__setattr__(self, "modes", modes)

    @classmethod
    def shear(cls, profile: FourierProfile) -> "FlowSpec":
        return cls(SHEAR, profile=profile)

    @classmethod
    def cellular(cls) -> "FlowSpec":
        return cls(CELLULAR)

    @classmethod
    def cats_eye(cls, delta: float) -> "FlowSpec":
        return cls(CATS_EYE, delta=float(delta))

    @classmethod
    def compressible_1d(cls, profile: FourierProfile) -> "FlowSpec":
        return cls(COMPRESSIBLE_1D, profile=profile)

    @classmethod
    def fourier_stream(cls, modes: Iterable) -> "FlowSpec":
        return cls(FOURIER_STREAM, modes=tuple(modes))

    @property
    def dimension(self) -> int:
        return 1 if self.kind == COMPRESSIBLE_1D else 2

    @property
    def has_stream_function(self) -> bool:
        return self.dimension == 2

    def label(self) -> str:
        if self.kind == CATS_EYE:
            return f"cats_eye(delta={self.delta:g})"
        if self.kind in (SHEAR, COMPRESSIBLE_1D):
            return f"{self.kind}[{self.profile.format()}]"
        if self.kind == FOURIER_STREAM:
            return f"fourier_stream[{len(self.modes)} modes]"
        return self.kind

    def to_mapping(self) -> dict[str, str]:
        out = {"kind": self.kind}
        if self.kind == CATS_EYE:
            out["delta"] = repr(self.delta)
        if self.profile is not None:
            out["profile"] = self.profile.format()
        if self.modes:
            out["modes"] = "; ".join(f"{k[0]} {k[1]} {a!r} {ph!r}" for k, a, ph in self.modes)
        return out


@dataclass(frozen=True)
class VelocitySample:
    position: np.ndarray
    velocity: np.ndarray
    jacobian: np.ndarray


def _split(x, dim: int):
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return (x[..., 0] if x.ndim and x.shape[-1:] == (1,) else x),
    if x.shape[-1] != 2:
        raise ValueError(f"expected points with last axis of length 2, got shape {x.shape}")
    return x[..., 0], x[..., 1]


def _stream_derivs(spec: FlowSpec, x1, x2):
    """Return ``H, H_x, H_y, H_xx, H_xy, H_yy`` and a uniform drift (u1, u2)."""
    zero = np.zeros(np.broadcast(x1, x2).shape)
    drift = (0.0, 0.0)
    if spec.kind in (CELLULAR, CATS_EYE):
        a, b = TWO_PI * x1, TWO_PI * x2
        sa, ca, sb, cb = np.sin(a), np.cos(a), np.sin(b), np.cos(b)
        d = spec.delta if spec.kind == CATS_EYE else 0.0
        w, w2 = TWO_PI, TWO_PI**2
        H = sa * sb + d * ca * cb
        Hx = w * (ca * sb - d * sa * cb)
        Hy = w * (sa * cb - d * ca * sb)
        Hxx = -w2 * H
        Hyy = -w2 * H
        Hxy = w2 * (ca * cb + d * sa * sb)
        return H, Hx, Hy, Hxx, Hxy, Hyy, drift
    if spec.kind == SHEAR:
        v = spec.profile
        # H_y = -v and H_x = 0 give V = (v(y), 0)
        return (-v.antiderivative(x2) + zero, zero, -v(x2) + zero, zero, zero, -v.deriv(x2) + zero, drift)
    if spec.kind == FOURIER_STREAM:
        H, Hx, Hy, Hxx, Hxy, Hyy = (zero.copy() for _ in range(6))
        u1 = u2 = 0.0
        for (k1, k2), amp, ph in spec.modes:
            if k1 == 0 and k2 == 0:
                u1 += amp * np.cos(ph)
                u2 += amp * np.sin(ph)
                H = H + amp * (np.sin(ph) * x1 - np.cos(ph) * x2)
                continue
            w1, w2 = TWO_PI * k1, TWO_PI * k2
            th = w1 * x1 + w2 * x2 + ph
            c, s = np.cos(th), np.sin(th)
            H = H + amp * c
            Hx = Hx - amp * w1 * s
            Hy = Hy - amp * w2 * s
            Hxx = Hxx - amp * w1 * w1 * c
            Hxy = Hxy - amp * w1 * w2 * c
            Hyy = Hyy - amp * w2 * w2 * c
        return H, Hx, Hy, Hxx, Hxy, Hyy, (u1, u2)
    raise NoStreamFunction(f"{spec.kind} flow has no stream function")


def eval_velocity(spec: FlowSpec, x, A: float = 1.0) -> np.ndarray:
    """Velocity ``A V(x)``; ``x`` has shape ``(..., dim)`` (1D also accepts bare scalars)."""
    if A < 0:
        raise ValueError("amplitude must be non-negative")
    if spec.dimension == 1:
        (x1,) = _split(x, 1)
        return A * spec.profile(np.mod(x1, 1.0))
    x1, x2 = _split(x, 2)
    _, Hx, Hy, _, _, _, (u1, u2) = _stream_derivs(spec, x1, x2)
    return A * np.stack([-Hy + u1, Hx + u2], axis=-1)


def eval_jacobian(spec: FlowSpec, x, A: float = 1.0) -> np.ndarray:
    """Exact ``A dV_i/dx_j``; shape ``(..., dim, dim)``."""
    if spec.dimension == 1:
        (x1,) = _split(x, 1)
        return A * spec.profile.deriv(x1)[..., None, None]
    x1, x2 = _split(x, 2)
    _, _, _, Hxx, Hxy, Hyy, _ = _stream_derivs(spec, x1, x2)
    row1 = np.stack([-Hxy, -Hyy], axis=-1)
    row2 = np.stack([Hxx, Hxy], axis=-1)
    return A * np.stack([row1, row2], axis=-2)


def eval_stream(spec: FlowSpec, x) -> np.ndarray:
    """Stream function ``H(x)`` of a 2D flow."""
    if spec.dimension != 2:
        raise NoStreamFunction(f"{spec.kind} flow has no stream function")
    x1, x2 = _split(x, 2)
    return _stream_derivs(spec, x1, x2)[0]


def velocity_sample(spec: FlowSpec, x, A: float = 1.0) -> VelocitySample:
    x = np.asarray(x, dtype=float)
    return VelocitySample(x, eval_velocity(spec, x, A), eval_jacobian(spec, x, A))


def velocity_on_grid(spec: FlowSpec, axes: list[np.ndarray], A: float = 1.0) -> list[np.ndarray]:
    """Velocity components on the tensor grid spanned by ``axes`` ('ij' indexing)."""
    if spec.dimension == 1:
        return [eval_velocity(spec, axes[0], A)]
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    V = eval_velocity(spec, np.stack([X, Y], axis=-1), A)
    return [np.ascontiguousarray(V[..., 0]), np.ascontiguousarray(V[..., 1])]


def max_abs_components(spec: FlowSpec, samples: int = 256) -> np.ndarray:
    """Per-axis ``max |V_i|`` over the unit cell (dense sampling)."""
    axes = [np.arange(samples) / samples] * spec.dimension
    return np.array([np.max(np.abs(c)) for c in velocity_on_grid(spec, axes)])


@dataclass(frozen=True)
class ValidationReport:
    mean_zero: bool
    div_free: bool
    mean_residual: float
    div_residual: float
    tol: float
    samples: int

    @property
    def ok(self) -> bool:
        return self.mean_zero and self.div_free

    def as_dict(self) -> dict:
        return {
            "mean_zero": self.mean_zero,
            "div_free": self.div_free,
            "mean_residual": self.mean_residual,
            "div_residual": self.div_residual,
            "tol": self.tol,
            "samples": self.samples,
        }


def validate(spec: FlowSpec, tol: float = 1e-10, samples: int = 64, strict: bool = False) -> ValidationReport:
    """Check mean zero and (2D) zero divergence on a uniform sample lattice.

    Both checks use the sample lattice spectrally: the lattice mean and the
    FFT derivative are exact for trigonometric polynomials resolved by the
    lattice, so the residuals sit at rounding level for valid flows.
    1D compressible flows are not required to be divergence-free.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    axes = [np.arange(samples) / samples] * spec.dimension
    comps = velocity_on_grid(spec, axes)
    mean_res = float(np.linalg.norm([c.mean() for c in comps]))
    div_res = 0.0
    if spec.dimension == 2:
        k = np.fft.fftfreq(samples, d=1.0 / samples) * TWO_PI
        ddx = np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(comps[0], axis=0), axis=0))
        ddy = np.real(np.fft.ifft(1j * k[None, :] * np.fft.fft(comps[1], axis=1), axis=1))
        div_res = float(np.max(np.abs(ddx + ddy)))
    report = ValidationReport(mean_res < tol, div_res < tol, mean_res, div_res, tol, samples)
    if strict and not report.ok:
        raise ValidationFailure(report)
    return report


def _parse_modes(text: str):
    modes = []
    for chunk in text.replace("\n", ";").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 4:
            raise ValueError(f"fourier_stream mode needs 'k1 k2 amplitude phase', got {chunk!r}")
        modes.append(((int(parts[0]), int(parts[1])), float(parts[2]), float(parts[3])))
    return tuple(modes)


def flow_from_mapping(m: Mapping[str, str]) -> FlowSpec:
    """Build a flow from ``kind``/``delta``/``profile``/``modes`` string entries."""
    kind = m.get("kind", "").strip().lower().replace("-", "_").replace("'", "")
    aliases = {"catseye": CATS_EYE, "cats_eye": CATS_EYE, "compressible_1d": COMPRESSIBLE_1D, "fourier": FOURIER_STREAM}
    kind = aliases.get(kind, kind)
    if kind == CELLULAR:
        return FlowSpec.cellular()
    if kind == CATS_EYE:
        return FlowSpec.cats_eye(float(m.get("delta", "0.5")))
    if kind in (SHEAR, COMPRESSIBLE_1D):
        prof = FourierProfile.parse(m.get("profile", "1 0 1"))
        return FlowSpec(kind, profile=prof)
    if kind == FOURIER_STREAM:
        return FlowSpec.fourier_stream(_parse_modes(m.get("modes", "")))
    raise ValueError(f"unknown flow kind {m.get('kind')!r}")


def load_flow(path: str | Path, section: str = "flow") -> FlowSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    if not cp.has_section(section):
        raise ValueError(f"{path}: missing [{section}] section")
    return flow_from_mapping(dict(cp[section]))
