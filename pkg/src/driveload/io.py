"""File formats: signal CSV, run configuration, frame NDJSON, snapshots.

Signal files are headered CSV with a required ``y`` column (lateral
acceleration, m/s^2) and optional ``t``, ``state``, ``speed`` columns.
State labels are 1-based on disk (1 = right turn, 2 = straight, 3 = left
turn) and 0-based in memory.  Reading is streamed in bounded chunks so a
hundred-million-row file never has to fit in memory; malformed rows are
counted, not fatal, until their fraction crosses a threshold.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .gal import EmissionModel, GalParams
from .online import ForgettingPolicy, OnlineHmmEstimator

__all__ = [
    "DataFormatError",
    "SignalChunk",
    "stream_signal",
    "write_signal_csv",
    "RunConfig",
    "write_ndjson",
    "save_snapshot",
    "load_snapshot",
    "emissions_to_dicts",
    "emissions_from_dicts",
]

CSV_STATE_BASE = 1
BAD_ROW_LIMIT = 0.01


class DataFormatError(ValueError):
    """Unusable input data: bad header, bad config, too many bad rows."""


class SignalChunk(NamedTuple):
    t: np.ndarray
    y: np.ndarray
    state: np.ndarray | None
    speed: np.ndarray | None
    n_rows: int  # data rows consumed so far, including malformed ones
    n_bad: int  # malformed rows so far


def stream_signal(
    path,
    chunk_size: int = 200_000,
    bad_row_limit: float = BAD_ROW_LIMIT,
) -> Iterator[SignalChunk]:
    """Yield a signal file in chunks, tracking malformed rows.

    A row is malformed if a needed field is missing, unparsable, or
    non-finite.  Once more than ``bad_row_limit`` of at least 1000 seen
    rows are malformed (also checked at end of file), the file is
    rejected with :class:`DataFormatError`.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file, expected a header row")
        cols = {name.strip().lower(): i for i, name in enumerate(header)}
        if "y" not in cols:
            raise DataFormatError(f"{path}: header {header!r} has no 'y' column")
        iy = cols["y"]
        it = cols.get("t")
        istate = cols.get("state")
        ispeed = cols.get("speed")

        n_rows = 0
        n_bad = 0
        t_buf: list[float] = []
        y_buf: list[float] = []
        s_buf: list[int] = []
        v_buf: list[float] = []

        def flush() -> SignalChunk:
            chunk = SignalChunk(
                t=np.asarray(t_buf, dtype=float),
                y=np.asarray(y_buf, dtype=float),
                state=np.asarray(s_buf, dtype=np.int64) if istate is not None else None,
                speed=np.asarray(v_buf, dtype=float) if ispeed is not None else None,
                n_rows=n_rows,
                n_bad=n_bad,
            )
            t_buf.clear()
            y_buf.clear()
            s_buf.clear()
            v_buf.clear()
            return chunk

        def check_bad_fraction():
            if n_rows >= 1000 and n_bad > bad_row_limit * n_rows:
                raise DataFormatError(
                    f"{path}: {n_bad} of {n_rows} rows malformed "
                    f"(limit {bad_row_limit:.1%})"
                )

        for row in reader:
            if not row:
                continue
            n_rows += 1
            try:
                y = float(row[iy])
                t = float(row[it]) if it is not None else float(n_rows - 1)
                if not (np.isfinite(y) and np.isfinite(t)):
                    raise ValueError
                if istate is not None:
                    s = int(row[istate]) - CSV_STATE_BASE
                    if s < 0:
                        raise ValueError
                if ispeed is not None:
                    v = float(row[ispeed])
                    if not np.isfinite(v):
                        raise ValueError
            except (ValueError, IndexError):
                n_bad += 1
                check_bad_fraction()
                continue
            t_buf.append(t)
            y_buf.append(y)
            if istate is not None:
                s_buf.append(s)
            if ispeed is not None:
                v_buf.append(v)
            if len(y_buf) >= chunk_size:
                yield flush()

        if n_rows > 0 and n_bad > bad_row_limit * n_rows:
            raise DataFormatError(
                f"{path}: {n_bad} of {n_rows} rows malformed (limit {bad_row_limit:.1%})"
            )
        if y_buf or n_bad or n_rows == 0:
            yield flush()


def write_signal_csv(path, y, t=None, state=None, speed=None) -> None:
    y = np.asarray(y, dtype=float)
    t = np.arange(y.size, dtype=float) if t is None else np.asarray(t, dtype=float)
    header = ["t", "y"]
    if state is not None:
        header.append("state")
        state = np.asarray(state)
    if speed is not None:
        header.append("speed")
        speed = np.asarray(speed, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(y.size):
            row: list = [f"{t[i]:.6g}", f"{y[i]:.9g}"]
            if state is not None:
                row.append(int(state[i]) + CSV_STATE_BASE)
            if speed is not None:
                row.append(f"{speed[i]:.6g}")
            w.writerow(row)


# ---------------------------------------------------------------------------
# configuration


def emissions_to_dicts(em: EmissionModel) -> list[dict]:
    return [
        {"delta": p.delta, "mu": p.mu, "nu": p.nu, "sigma": p.sigma} for p in em.states
    ]


def emissions_from_dicts(items: Sequence[dict]) -> EmissionModel:
    return EmissionModel(tuple(GalParams(**d) for d in items))


_CONFIG_KEYS = {
    "version",
    "seed",
    "stride",
    "burn_in",
    "frame_size",
    "beta",
    "speed_threshold",
    "policy",
    "emissions",
    "q0",
}


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the command-line tools, JSON-serializable.

    ``stride`` is the reporting interval in observations; ``frame_size``
    the damage-report frame length in samples; ``beta`` the damage
    exponents to evaluate; ``speed_threshold`` (km/h) gates out rows
    where the vehicle is too slow for lateral acceleration to indicate a
    turn.
    """

    CONFIG_VERSION = 1

    seed: int | None = None
    stride: int = 100
    burn_in: int = 50
    frame_size: int = 2000
    beta: tuple[float, ...] = (3.0, 5.0)
    speed_threshold: float = 10.0
    policy: ForgettingPolicy | None = None
    emissions: EmissionModel | None = None
    q0: np.ndarray | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - _CONFIG_KEYS
        if unknown:
            raise DataFormatError(f"unknown config keys: {sorted(unknown)}")
        version = d.get("version", cls.CONFIG_VERSION)
        if version != cls.CONFIG_VERSION:
            raise DataFormatError(f"unsupported config version {version!r}")
        kw: dict = {}
        for key in ("seed", "stride", "burn_in", "frame_size", "speed_threshold"):
            if key in d:
                kw[key] = d[key]
        if "beta" in d:
            beta = d["beta"]
            kw["beta"] = tuple(float(b) for b in (beta if isinstance(beta, (list, tuple)) else [beta]))
        if d.get("policy") is not None:
            kw["policy"] = ForgettingPolicy.from_dict(d["policy"])
        if d.get("emissions") is not None:
            kw["emissions"] = emissions_from_dicts(d["emissions"])
        if d.get("q0") is not None:
            kw["q0"] = np.asarray(d["q0"], dtype=float)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(d, dict):
            raise DataFormatError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d: dict = {
            "version": self.CONFIG_VERSION,
            "stride": self.stride,
            "burn_in": self.burn_in,
            "frame_size": self.frame_size,
            "beta": list(self.beta),
            "speed_threshold": self.speed_threshold,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        if self.policy is not None:
            d["policy"] = self.policy.to_dict()
        if self.emissions is not None:
            d["emissions"] = emissions_to_dicts(self.emissions)
        if self.q0 is not None:
            d["q0"] = np.asarray(self.q0).tolist()
        return d

    def override(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


# ---------------------------------------------------------------------------
# outputs


def write_ndjson(fh, obj: dict) -> None:
    fh.write(json.dumps(obj, separators=(",", ":"), allow_nan=False))
    fh.write("\n")


def save_snapshot(est: OnlineHmmEstimator, path) -> None:
    with open(path, "w") as fh:
        json.dump(est.state_dict(), fh)
        fh.write("\n")


def load_snapshot(path) -> OnlineHmmEstimator:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"{path}: invalid snapshot JSON ({e})") from e
    return OnlineHmmEstimator.from_state_dict(d)
