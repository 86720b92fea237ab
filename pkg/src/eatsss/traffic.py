"""Request workload: Poisson arrivals of Zipf-popular files with random sizes."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class TrafficType(str, enum.Enum):
    EMBB = "eMBB"
    URLLC = "URLLC"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value) -> "TrafficType":
        if isinstance(value, TrafficType):
            return value
        for t in cls:
            if str(value).strip().lower() == t.value.lower():
                return t
        raise ValueError(f"unknown traffic type {value!r}")


@dataclass(frozen=True)
class ContentLibrary:
    popularity: np.ndarray  # P_F(f) for f = 1..N_F, index f-1
    sizes_bytes: np.ndarray
    zipf_alpha: float

    @property
    def n_files(self) -> int:
        return len(self.popularity)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.popularity)
        c[-1] = 1.0
        return c


@dataclass(frozen=True, slots=True)
class Request:
    arrival_time_s: float
    user_id: int
    file_id: int
    size_bytes: int
    traffic_type: TrafficType = TrafficType.EMBB


@dataclass(frozen=True)
class ArrivalConfig:
    lambda_per_s: float = 2.0
    horizon_s: float = 600.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.lambda_per_s) and self.lambda_per_s > 0):
            raise ValueError(f"lambda_per_s must be finite and > 0, got {self.lambda_per_s}")
        if not (math.isfinite(self.horizon_s) and self.horizon_s >= 0):
            raise ValueError(f"horizon_s must be finite and >= 0, got {self.horizon_s}")


def zipf_pmf(n_files: int, alpha: float) -> np.ndarray:
    """P(f) = Z * f**-alpha over f = 1..n_files, with Z normalizing the sum to one."""
    if n_files < 1:
        raise ValueError(f"n_files must be >= 1, got {n_files}")
    if not alpha >= 0:
        raise ValueError(f"zipf alpha must be >= 0, got {alpha}")
    ranks = np.arange(1, n_files + 1, dtype=float)
    w = ranks ** -float(alpha)
    # sum smallest-first for accuracy at large n
    return w / np.sum(w[::-1])


def sample_file(library: ContentLibrary, rng: np.random.Generator) -> int:
    """Draw one 1-based file id by inverse CDF."""
    return int(sample_files(library, rng, 1)[0])


def sample_files(library: ContentLibrary, rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random(n)
    idx = np.searchsorted(library.cdf, u, side="right")
    return np.minimum(idx, library.n_files - 1) + 1


def assign_file_sizes(n_files: int, size_min: int, size_max: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 < size_min <= size_max:
        raise ValueError(f"need 0 < size_min <= size_max, got [{size_min}, {size_max}]")
    return rng.integers(int(size_min), int(size_max), size=n_files, endpoint=True)


def build_library(
    n_files: int,
    alpha: float,
    size_min: int,
    size_max: int,
    rng: np.random.Generator,
) -> ContentLibrary:
    return ContentLibrary(zipf_pmf(n_files, alpha), assign_file_sizes(n_files, size_min, size_max, rng), alpha)


def poisson_pmf(r: int, lam: float, t_interval: float = 1.0) -> float:
    """Probability of exactly ``r`` events in an interval of length ``t_interval``."""
    if r < 0:
        raise ValueError(f"event count must be >= 0, got {r}")
    mean = lam * t_interval
    if not (math.isfinite(mean) and mean >= 0):
        raise ValueError(f"lambda*T must be finite and >= 0, got {mean}")
    if mean == 0:
        return 1.0 if r == 0 else 0.0
    return math.exp(r * math.log(mean) - mean - math.lgamma(r + 1))


def generate_requests(
    cfg: ArrivalConfig,
    library: ContentLibrary,
    user_ids: Sequence[int],
    rng: np.random.Generator | None = None,
    file_rng: np.random.Generator | None = None,
    traffic_type: TrafficType = TrafficType.EMBB,
) -> list[Request]:
    """Poisson request stream over ``[0, cfg.horizon_s)``.

    Inter-arrival gaps are i.i.d. exponential with rate ``cfg.lambda_per_s``;
    each arrival picks a user uniformly and a file by popularity.  Arrivals
    and user picks come from ``rng``, file picks from ``file_rng`` (which
    defaults to ``rng``).
    """
    if len(user_ids) == 0:
        raise ValueError("user_ids must be non-empty")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if file_rng is None:
        file_rng = rng
    if cfg.horizon_s == 0:
        return []

    scale = 1.0 / cfg.lambda_per_s
    chunk = max(16, int(cfg.lambda_per_s * cfg.horizon_s * 1.1) + 16)
    times: list[np.ndarray] = []
    t0 = 0.0
    while True:
        arr = t0 + np.cumsum(rng.exponential(scale, chunk))
        times.append(arr)
        t0 = float(arr[-1])
        if t0 >= cfg.horizon_s:
            break
    t = np.concatenate(times)
    t = t[t < cfg.horizon_s]
    n = len(t)
    users = np.asarray(user_ids)[rng.integers(0, len(user_ids), n)]
    files = sample_files(library, file_rng, n)
    sizes = library.sizes_bytes[files - 1]
    return [
        Request(float(t[i]), int(users[i]), int(files[i]), int(sizes[i]), traffic_type)
        for i in range(n)
    ]


REQUEST_COLUMNS = ("arrival_time_s", "user_id", "file_id", "size_bytes", "traffic_type")


def write_requests_csv(requests: Iterable[Request], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_COLUMNS)
        for r in requests:
            w.writerow([repr(r.arrival_time_s), r.user_id, r.file_id, r.size_bytes, r.traffic_type.value])
    return path


def read_requests_csv(path) -> list[Request]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        Request(
            float(row["arrival_time_s"]),
            int(row["user_id"]),
            int(row["file_id"]),
            int(row["size_bytes"]),
            TrafficType.parse(row["traffic_type"]),
        )
        for row in rows
    ]
