"""Appliance load signatures and catalogs.

A load signature ``f`` is a power-versus-time template that is zero outside
``[0, duration]`` and continuously differentiable on the whole real line.
Every family provides closed-form first and second derivatives, so the
correlation matrices built from them (and their gradients) are exact.

Second derivatives may jump at a finite set of breakpoints.  Evaluation uses
the right limit there: the support is treated as the half-open interval
``[0, duration)`` and internal pieces are half-open as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np
from numpy.polynomial import polynomial as P

from . import _yaml
from .errors import CatalogError, ValidationError

__all__ = [
    "LoadSignature",
    "RaisedCosinePulse",
    "SmoothTrapezoid",
    "DoublePulse",
    "PiecewisePolynomial",
    "SignatureCatalog",
    "evaluate",
    "parse_catalog",
    "load_catalog",
    "signature_from_record",
]

_ORDERS = (0, 1, 2)
CONTINUITY_RTOL = 1e-9


def _check_order(order):
    if order not in _ORDERS:
        raise ValidationError(f"derivative order must be 0, 1 or 2, got {order!r}")


def _check_amplitude(name, value):
    if not math.isfinite(value) or value < 0:
        raise ValidationError(f"{name} must be finite and non-negative, got {value!r}")


def _check_width(name, value):
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be finite and positive, got {value!r}")


def _raised_cosine(s, amplitude, width, order):
    # a (1 - cos(w s)) / 2 with w = 2 pi / width
    w = 2.0 * math.pi / width
    if order == 0:
        return 0.5 * amplitude * (1.0 - np.cos(w * s))
    if order == 1:
        return 0.5 * amplitude * w * np.sin(w * s)
    return 0.5 * amplitude * w * w * np.cos(w * s)


def _half_cosine_up(s, amplitude, width, order):
    # rising half period: a (1 - cos(pi s / width)) / 2
    w = math.pi / width
    if order == 0:
        return 0.5 * amplitude * (1.0 - np.cos(w * s))
    if order == 1:
        return 0.5 * amplitude * w * np.sin(w * s)
    return 0.5 * amplitude * w * w * np.cos(w * s)


class LoadSignature:
    """Base class for compactly supported, C1 load signatures."""

    kind: ClassVar[str]
    # subclasses provide ``duration`` (field or property): support is [0, duration]

    def breakpoints(self) -> np.ndarray:
        """Sorted points in ``[0, duration]`` where the second derivative may jump."""
        raise NotImplementedError

    def scaled(self, factor: float) -> LoadSignature:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def _inside(self, s: np.ndarray, order: int) -> np.ndarray:
        raise NotImplementedError

    def eval(self, t, order: int = 0):
        """Evaluate ``f``, ``f'`` or ``f''`` at ``t`` (scalar or array).

        Returns exactly zero outside ``[0, duration)`` for every order.
        """
        _check_order(order)
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape)
        inside = (t_arr >= 0.0) & (t_arr < self.duration)
        if np.any(inside):
            out[inside] = self._inside(t_arr[inside], order)
        if t_arr.ndim == 0:
            return float(out)
        return out

    __call__ = eval

    def to_record(self) -> dict:
        return {"kind": self.kind, "params": self.params()}


@dataclass(frozen=True)
class RaisedCosinePulse(LoadSignature):
    """Single raised-cosine bump ``a (1 - cos(2 pi t / T)) / 2`` on ``[0, T]``."""

    amplitude: float
    duration: float

    kind: ClassVar[str] = "raised_cosine"

    def __post_init__(self):
        _check_amplitude("amplitude", self.amplitude)
        _check_width("duration", self.duration)

    def breakpoints(self):
        return np.array([0.0, self.duration])

    def scaled(self, factor):
        return RaisedCosinePulse(self.amplitude * factor, self.duration)

    def params(self):
        return {"amplitude": self.amplitude, "duration": self.duration}

    def _inside(self, s, order):
        return _raised_cosine(s, self.amplitude, self.duration, order)


@dataclass(frozen=True)
class SmoothTrapezoid(LoadSignature):
    """Plateau of height ``amplitude`` with half-cosine ramps of width ``rise`` and ``fall``."""

    amplitude: float
    rise: float
    fall: float
    duration: float

    kind: ClassVar[str] = "smooth_trapezoid"

    def __post_init__(self):
        _check_amplitude("amplitude", self.amplitude)
        _check_width("rise", self.rise)
        _check_width("fall", self.fall)
        _check_width("duration", self.duration)
        if self.rise + self.fall > self.duration * (1 + 1e-12):
            raise ValidationError(
                f"rise + fall ({self.rise + self.fall}) exceeds duration ({self.duration})"
            )

    def breakpoints(self):
        return np.unique([0.0, self.rise, self.duration - self.fall, self.duration])

    def scaled(self, factor):
        return SmoothTrapezoid(self.amplitude * factor, self.rise, self.fall, self.duration)

    def params(self):
        return {
            "amplitude": self.amplitude,
            "rise": self.rise,
            "fall": self.fall,
            "duration": self.duration,
        }

    def _inside(self, s, order):
        out = np.zeros_like(s)
        fall_start = self.duration - self.fall
        up = s < self.rise
        down = s >= fall_start
        flat = ~up & ~down
        out[up] = _half_cosine_up(s[up], self.amplitude, self.rise, order)
        if order == 0:
            out[flat] = self.amplitude
        # falling ramp is the rising ramp mirrored about the end of the support
        mirrored = _half_cosine_up(self.duration - s[down], self.amplitude, self.fall, order)
        out[down] = -mirrored if order == 1 else mirrored
        return out


@dataclass(frozen=True)
class DoublePulse(LoadSignature):
    """Two raised-cosine bumps separated by an idle ``gap``.

    The second bump defaults to the first one's amplitude and width.
    """

    amplitude: float
    width: float
    gap: float
    second_amplitude: float | None = None
    second_width: float | None = None

    kind: ClassVar[str] = "double_pulse"

    def __post_init__(self):
        _check_amplitude("amplitude", self.amplitude)
        _check_width("width", self.width)
        if not math.isfinite(self.gap) or self.gap < 0:
            raise ValidationError(f"gap must be finite and non-negative, got {self.gap!r}")
        if self.second_amplitude is None:
            object.__setattr__(self, "second_amplitude", self.amplitude)
        if self.second_width is None:
            object.__setattr__(self, "second_width", self.width)
        _check_amplitude("second_amplitude", self.second_amplitude)
        _check_width("second_width", self.second_width)

    @property
    def duration(self):
        return self.width + self.gap + self.second_width

    @property
    def second_onset(self):
        return self.width + self.gap

    def breakpoints(self):
        return np.unique([0.0, self.width, self.second_onset, self.duration])

    def scaled(self, factor):
        return DoublePulse(
            self.amplitude * factor,
            self.width,
            self.gap,
            self.second_amplitude * factor,
            self.second_width,
        )

    def params(self):
        return {
            "amplitude": self.amplitude,
            "width": self.width,
            "gap": self.gap,
            "second_amplitude": self.second_amplitude,
            "second_width": self.second_width,
        }

    def _inside(self, s, order):
        out = np.zeros_like(s)
        first = s < self.width
        second = s >= self.second_onset
        out[first] = _raised_cosine(s[first], self.amplitude, self.width, order)
        out[second] = _raised_cosine(
            s[second] - self.second_onset, self.second_amplitude, self.second_width, order
        )
        return out


@dataclass(frozen=True)
class PiecewisePolynomial(LoadSignature):
    """Piecewise polynomial signature.

    ``pieces`` is a sequence of ``(start, end, coeffs)`` with contiguous
    intervals starting at 0; ``coeffs`` are in ascending powers of the local
    variable ``t - start``.  The construction checks that ``f`` and ``f'`` are
    continuous at every breakpoint and vanish at both ends of the support.
    """

    pieces: tuple

    kind: ClassVar[str] = "piecewise_polynomial"

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise ValidationError("piecewise polynomial needs at least one piece")
        normalized = []
        for idx, piece in enumerate(self.pieces):
            start, end, coeffs = piece
            coeffs = tuple(float(c) for c in coeffs)
            if not coeffs or not all(math.isfinite(c) for c in coeffs):
                raise ValidationError(f"piece {idx}: coefficients must be finite and non-empty")
            if not (math.isfinite(start) and math.isfinite(end) and end > start):
                raise ValidationError(f"piece {idx}: interval [{start}, {end}] is empty")
            normalized.append((float(start), float(end), coeffs))
        if normalized[0][0] != 0.0:
            raise ValidationError("first piece must start at 0")
        for idx in range(1, len(normalized)):
            if normalized[idx][0] != normalized[idx - 1][1]:
                raise ValidationError(
                    f"piece {idx} starts at {normalized[idx][0]} but piece {idx - 1} "
                    f"ends at {normalized[idx - 1][1]}"
                )
        object.__setattr__(self, "pieces", tuple(normalized))
        self._check_continuity()

    def _edge_values(self, order):
        """(left-limit, right-limit) at each breakpoint, zero outside the support."""
        left = [0.0]
        right = []
        for start, end, coeffs in self.pieces:
            c = P.polyder(coeffs, order) if order else np.asarray(coeffs)
            right.append(float(P.polyval(0.0, c)))
            left.append(float(P.polyval(end - start, c)))
        right.append(0.0)
        return left, right

    def _check_continuity(self):
        edges = [0.0] + [end for _, end, _ in self.pieces]
        for order in (0, 1):
            left, right = self._edge_values(order)
            scale = max(1.0, *map(abs, left), *map(abs, right))
            for x, lo, hi in zip(edges, left, right):
                if abs(lo - hi) > CONTINUITY_RTOL * scale:
                    what = "value" if order == 0 else "first derivative"
                    raise ValidationError(
                        f"{what} is discontinuous at breakpoint t={x}: "
                        f"left {lo!r} vs right {hi!r}"
                    )

    @property
    def duration(self):
        return self.pieces[-1][1]

    def breakpoints(self):
        return np.array([0.0] + [end for _, end, _ in self.pieces])

    def scaled(self, factor):
        return PiecewisePolynomial(
            tuple((s, e, tuple(factor * c for c in coeffs)) for s, e, coeffs in self.pieces)
        )

    def params(self):
        return {}

    def to_record(self):
        return {
            "kind": self.kind,
            "pieces": [
                {"start": s, "end": e, "coeffs": list(coeffs)} for s, e, coeffs in self.pieces
            ],
        }

    def _inside(self, s, order):
        out = np.zeros_like(s)
        starts = np.array([p[0] for p in self.pieces])
        which = np.searchsorted(starts, s, side="right") - 1
        for idx, (start, _, coeffs) in enumerate(self.pieces):
            mask = which == idx
            if np.any(mask):
                c = P.polyder(coeffs, order) if order else coeffs
                out[mask] = P.polyval(s[mask] - start, c)
        return out


def evaluate(sig: LoadSignature, t, order: int = 0):
    """Functional alias of :meth:`LoadSignature.eval`."""
    return sig.eval(t, order)


@dataclass(frozen=True)
class SignatureCatalog:
    """Ordered, labelled collection of signatures (one per appliance)."""

    labels: tuple
    signatures: tuple

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        sigs = tuple(self.signatures)
        if len(sigs) == 0:
            raise ValidationError("catalog must contain at least one signature")
        if len(labels) != len(sigs):
            raise ValidationError("labels and signatures differ in length")
        if len(set(labels)) != len(labels):
            dupes = sorted({lab for lab in labels if labels.count(lab) > 1})
            raise ValidationError(f"duplicate signature labels: {dupes}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "signatures", sigs)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __len__(self):
        return len(self.signatures)

    def __iter__(self):
        return iter(self.signatures)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.signatures[self.labels.index(key)]
        return self.signatures[key]

    @property
    def durations(self) -> np.ndarray:
        return np.array([sig.duration for sig in self.signatures])

    def to_record(self) -> dict:
        return {
            "signatures": [
                {"label": label, **sig.to_record()}
                for label, sig in zip(self.labels, self.signatures)
            ]
        }

    def to_yaml(self) -> str:
        import yaml

        return yaml.safe_dump(self.to_record(), sort_keys=False)


_FAMILY_PARAMS = {
    "raised_cosine": ({"amplitude", "duration"}, set()),
    "smooth_trapezoid": ({"amplitude", "rise", "fall", "duration"}, set()),
    "double_pulse": ({"amplitude", "width", "gap"}, {"second_amplitude", "second_width"}),
}


def signature_from_record(record, path="signature") -> LoadSignature:
    """Build one signature from a parsed ``{kind, params | pieces}`` mapping."""
    record = _yaml.require_mapping(record, path)
    kind = _yaml.require(record, "kind", path)
    if kind == "piecewise_polynomial":
        _yaml.reject_unknown(record, {"label", "kind", "pieces"}, path)
        raw = _yaml.require(record, "pieces", path)
        if not isinstance(raw, list) or not raw:
            raise CatalogError("pieces must be a non-empty list", record.where("pieces", path))
        pieces = []
        for idx, piece in enumerate(raw):
            ppath = f"{path}.pieces[{idx}]"
            piece = _yaml.require_mapping(piece, ppath, record, "pieces")
            _yaml.reject_unknown(piece, {"start", "end", "coeffs"}, ppath)
            pieces.append(
                (
                    _yaml.real(piece, "start", ppath),
                    _yaml.real(piece, "end", ppath),
                    _yaml.real_list(piece, "coeffs", ppath),
                )
            )
        try:
            return PiecewisePolynomial(tuple(pieces))
        except ValidationError as exc:
            raise CatalogError(str(exc), record.where("pieces", path)) from None

    if kind not in _FAMILY_PARAMS:
        allowed = ", ".join(sorted([*_FAMILY_PARAMS, "piecewise_polynomial"]))
        raise CatalogError(f"unknown kind {kind!r} (allowed: {allowed})", record.where("kind", path))
    _yaml.reject_unknown(record, {"label", "kind", "params"}, path)
    ppath = f"{path}.params"
    params = _yaml.require_mapping(_yaml.require(record, "params", path), ppath, record, "params")
    required, optional = _FAMILY_PARAMS[kind]
    _yaml.reject_unknown(params, required | optional, ppath)
    values = {name: _yaml.real(params, name, ppath) for name in required}
    values.update({name: _yaml.real(params, name, ppath) for name in optional if name in params})
    try:
        if kind == "raised_cosine":
            return RaisedCosinePulse(values["amplitude"], values["duration"])
        if kind == "smooth_trapezoid":
            return SmoothTrapezoid(
                values["amplitude"], values["rise"], values["fall"], values["duration"]
            )
        return DoublePulse(
            values["amplitude"],
            values["width"],
            values["gap"],
            values.get("second_amplitude"),
            values.get("second_width"),
        )
    except ValidationError as exc:
        raise CatalogError(str(exc), params.where(None, ppath)) from None


def catalog_from_records(entries, path="signatures") -> SignatureCatalog:
    if not isinstance(entries, list) or not entries:
        raise CatalogError("expected a non-empty list of signatures", path)
    labels, sigs = [], []
    for idx, entry in enumerate(entries):
        epath = f"{path}[{idx}]"
        entry = _yaml.require_mapping(entry, epath)
        label = _yaml.require(entry, "label", epath)
        if not isinstance(label, str) or not label:
            raise CatalogError("label must be a non-empty string", entry.where("label", epath))
        if label in labels:
            raise CatalogError(f"duplicate label {label!r}", entry.where("label", epath))
        labels.append(label)
        sigs.append(signature_from_record(entry, epath))
    return SignatureCatalog(tuple(labels), tuple(sigs))


def parse_catalog(document: str) -> SignatureCatalog:
    """Parse a YAML catalog document.

    The document holds a single top-level ``signatures`` list; each entry has
    ``label``, ``kind`` and either ``params`` (built-in families) or
    ``pieces`` (``piecewise_polynomial``).  Unknown fields are rejected and
    continuity is checked while loading.
    """
    data = _yaml.load(document)
    root = _yaml.require_mapping(data, "document")
    _yaml.reject_unknown(root, {"signatures"}, "document")
    return catalog_from_records(_yaml.require(root, "signatures", "document"))


def load_catalog(path) -> SignatureCatalog:
    return parse_catalog(Path(path).read_text())
