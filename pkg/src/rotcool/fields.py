"""Time-sampled complex control envelopes and their on-disk formats."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ControlField", "BINARY_MAGIC"]

BINARY_MAGIC = b"QOCFLD01"


@dataclass(eq=False)
class ControlField:
    """Piecewise-constant complex envelope eps(t_k) on a uniform grid.

    ``samples[k]`` holds over [k*dt, (k+1)*dt); analytic envelopes are
    discretized at the left endpoint of each step.
    """

    dt: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=complex)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("field needs at least one sample")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.samples.view(float))):
            raise ValueError("field samples must be finite")

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def copy(self) -> "ControlField":
        return ControlField(self.dt, self.samples.copy())

    def norm(self) -> float:
        """sqrt of the integrated intensity, sqrt(dt * sum |eps|^2)."""
        return float(np.sqrt(self.dt * np.sum(np.abs(self.samples) ** 2)))

    # ---------------------------------------------------------------- constructors

    @classmethod
    def zeros(cls, n_samples: int, dt: float) -> "ControlField":
        return cls(dt, np.zeros(n_samples, dtype=complex))

    @classmethod
    def from_callable(cls, fn, n_samples: int, dt: float) -> "ControlField":
        t = np.arange(n_samples) * dt
        return cls(dt, np.array([fn(tk) for tk in t], dtype=complex))

    @classmethod
    def sine_squared_pulse(
        cls, amplitude: complex, n_samples: int, dt: float
    ) -> "ControlField":
        """Flat complex amplitude under a sin^2 window vanishing at both ends."""
        t = np.arange(n_samples) * dt
        window = np.sin(np.pi * t / (n_samples * dt)) ** 2
        return cls(dt, amplitude * window)

    # ---------------------------------------------------------------- CSV format

    def to_csv(self, path) -> None:
        """Columns (t, re, im), 17 significant digits, RFC-4180 line endings."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "re", "im"])
            for k, eps in enumerate(self.samples):
                writer.writerow(
                    [
                        format(k * self.dt, ".17g"),
                        format(eps.real, ".17g"),
                        format(eps.imag, ".17g"),
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "ControlField":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:3] != ["t", "re", "im"]:
                raise ValueError(f"unexpected field CSV header in {path}: {header}")
            rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader]
        if not rows:
            raise ValueError(f"field CSV {path} has no samples")
        t = np.array([r[0] for r in rows])
        if len(rows) == 1:
            raise ValueError(f"cannot infer dt from a single-sample CSV {path}")
        steps = np.diff(t)
        dt = steps[0]
        if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
            raise ValueError(f"non-uniform time grid in {path}")
        return cls(dt, np.array([complex(re, im) for _, re, im in rows]))

    # ---------------------------------------------------------------- binary format

    def to_binary(self, path) -> None:
        """Magic header then little-endian f64 triplets (t, re, im)."""
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            for k, eps in enumerate(self.samples):
                fh.write(struct.pack("<3d", k * self.dt, eps.real, eps.imag))

    @classmethod
    def from_binary(cls, path) -> "ControlField":
        with open(path, "rb") as fh:
            magic = fh.read(len(BINARY_MAGIC))
            if magic != BINARY_MAGIC:
                raise ValueError(f"{path} is not a field file (bad magic {magic!r})")
            payload = fh.read()
        if len(payload) % 24 or not payload:
            raise ValueError(f"truncated field file {path}")
        triplets = [struct.unpack_from("<3d", payload, 24 * i) for i in range(len(payload) // 24)]
        if len(triplets) == 1:
            raise ValueError(f"cannot infer dt from a single-sample file {path}")
        t = np.array([tr[0] for tr in triplets])
        steps = np.diff(t)
        dt = steps[0]
        if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
            raise ValueError(f"non-uniform time grid in {path}")
        return cls(dt, np.array([complex(re, im) for _, re, im in triplets]))
