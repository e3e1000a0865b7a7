"""Per-second access data: observation opportunities, contacts, eclipse."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SatelliteAccess:
    """Sampled access for one satellite.

    ``gs_index`` holds an index into the timeline's ``ground_station_ids``
    (``-1`` for no contact).  ``observations`` is sparse: sample time to the
    sorted tuple of target ids observable at that time.
    """

    satellite_id: str
    eclipsed: np.ndarray
    gs_index: np.ndarray
    observations: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, SatelliteAccess):
            return NotImplemented
        return (
            self.satellite_id == other.satellite_id
            and np.array_equal(self.eclipsed, other.eclipsed)
            and np.array_equal(self.gs_index, other.gs_index)
            and self.observations == other.observations
        )


@dataclass
class AccessTimeline:
    horizon: int
    step: int
    ground_station_ids: list[str]
    satellites: list[SatelliteAccess]

    @property
    def n_samples(self) -> int:
        return len(range(0, self.horizon, self.step))

    def times(self) -> np.ndarray:
        return np.arange(0, self.horizon, self.step, dtype=np.int64)

    def satellite(self, satellite_id: str) -> SatelliteAccess:
        for sat in self.satellites:
            if sat.satellite_id == satellite_id:
                return sat
        raise KeyError(satellite_id)

    # per-second expansions, used by cycle building and validation

    def eclipsed_seconds(self, satellite_id: str) -> np.ndarray:
        sat = self.satellite(satellite_id)
        return np.repeat(sat.eclipsed, self.step)[: self.horizon]

    def contact_seconds(self, satellite_id: str) -> np.ndarray:
        sat = self.satellite(satellite_id)
        return np.repeat(sat.gs_index, self.step)[: self.horizon]

    def opportunity_seconds(self, satellite_id: str) -> dict[int, tuple[str, ...]]:
        # images are 1 s long and only exist at sample instants
        return dict(self.satellite(satellite_id).observations)

    def counts(self) -> dict[str, dict[str, int]]:
        out = {}
        for sat in self.satellites:
            out[sat.satellite_id] = {
                "observation_samples": len(sat.observations),
                "contact_samples": int(np.count_nonzero(sat.gs_index >= 0)),
                "eclipse_samples": int(np.count_nonzero(sat.eclipsed)),
            }
        return out

    # ------------------------------------------------------------------ io

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            for line in header_comment.splitlines():
                buf.write(f"# {line}\n")
        buf.write(f"# horizon={self.horizon} step={self.step}\n")
        buf.write(f"# ground_stations={';'.join(self.ground_station_ids)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["satellite_id", "t", "obs_target_ids", "gs_id", "eclipsed"])
        times = self.times()
        for sat in self.satellites:
            for j, t in enumerate(times):
                obs = sat.observations.get(int(t), ())
                g = int(sat.gs_index[j])
                writer.writerow([
                    sat.satellite_id,
                    int(t),
                    ";".join(obs),
                    self.ground_station_ids[g] if g >= 0 else "",
                    int(bool(sat.eclipsed[j])),
                ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> tuple["AccessTimeline", dict[str, str]]:
        """Parse CSV text; returns the timeline and the ``key=value`` header metadata."""
        meta: dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            elif line.strip():
                body.append(line)
        if "horizon" not in meta or "step" not in meta:
            raise ValueError("timeline CSV is missing the horizon/step header")
        horizon, step = int(meta["horizon"]), int(meta["step"])
        gs_ids = [g for g in meta.get("ground_stations", "").split(";") if g]
        gs_lookup = {g: i for i, g in enumerate(gs_ids)}
        n = len(range(0, horizon, step))
        reader = csv.DictReader(body)
        sats: dict[str, SatelliteAccess] = {}
        for row in reader:
            sid = row["satellite_id"]
            sat = sats.get(sid)
            if sat is None:
                sat = SatelliteAccess(sid, np.zeros(n, dtype=bool), np.full(n, -1, dtype=np.int64))
                sats[sid] = sat
            t = int(row["t"])
            j = t // step
            if row["obs_target_ids"]:
                sat.observations[t] = tuple(row["obs_target_ids"].split(";"))
            if row["gs_id"]:
                sat.gs_index[j] = gs_lookup[row["gs_id"]]
            sat.eclipsed[j] = row["eclipsed"] == "1"
        return cls(horizon, step, gs_ids, list(sats.values())), meta

    def to_dict(self) -> dict:
        sats = []
        for sat in self.satellites:
            sats.append({
                "satellite_id": sat.satellite_id,
                "eclipsed": _runs(sat.eclipsed.astype(np.int64)),
                "gs_index": _runs(sat.gs_index),
                "observations": [[t, list(ids)] for t, ids in sorted(sat.observations.items())],
            })
        return {
            "horizon_s": self.horizon,
            "step_s": self.step,
            "ground_station_ids": list(self.ground_station_ids),
            "satellites": sats,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AccessTimeline":
        horizon, step = int(doc["horizon_s"]), int(doc["step_s"])
        n = len(range(0, horizon, step))
        sats = []
        for s in doc["satellites"]:
            sats.append(SatelliteAccess(
                s["satellite_id"],
                _unruns(s["eclipsed"], n).astype(bool),
                _unruns(s["gs_index"], n),
                {int(t): tuple(ids) for t, ids in s["observations"]},
            ))
        return cls(horizon, step, list(doc["ground_station_ids"]), sats)


def _runs(values: np.ndarray) -> list[list[int]]:
    """Run-length encode as [value, count] pairs."""
    if values.size == 0:
        return []
    edges = np.flatnonzero(np.diff(values)) + 1
    starts = np.concatenate([[0], edges])
    lengths = np.diff(np.concatenate([starts, [values.size]]))
    return [[int(values[s]), int(n)] for s, n in zip(starts, lengths)]


def _unruns(runs: list, n: int) -> np.ndarray:
    out = np.concatenate([np.full(c, v, dtype=np.int64) for v, c in runs]) if runs else np.zeros(0, np.int64)
    if out.size != n:
        raise ValueError(f"run-length data covers {out.size} samples, expected {n}")
    return out
