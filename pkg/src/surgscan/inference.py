"""Two-stage inspection cascade with pluggable classifier backends.

Stage 1 names the instrument; stage 2 runs the defect classifier registered
for that instrument. Backends are pluggable so the pipeline runs and is
testable without trained weights: a tag-reading stub ships for fixtures, and
an external-process adapter bridges to any real detector runtime.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

from surgscan.core import (
    DefectClass,
    InstrumentClass,
    SurgScanError,
    UnknownDefect,
    UnknownInstrument,
    parse_defect,
    parse_instrument,
)
from surgscan.imaging import Raster, encode_png

# PNG text key under which fixture images embed their ground-truth tags.
TAGS_KEY = "surgscan_tags"


class BackendFailure(SurgScanError):
    pass


class UnknownLabel(SurgScanError):
    """A backend emitted a label outside the closed vocabulary."""


class NoBackendForInstrument(SurgScanError):
    pass


class DuplicateBackend(SurgScanError):
    pass


class UnknownBackend(SurgScanError):
    pass


@dataclass(frozen=True)
class ClassifierVerdict:
    label: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


class LowConfidenceInstrument(SurgScanError):
    """Stage 1 was too unsure to route; carries its verdict for review."""

    def __init__(self, verdict: ClassifierVerdict, threshold: float):
        self.verdict = verdict
        self.threshold = threshold
        super().__init__(
            f"instrument confidence {verdict.confidence:.3f} below threshold "
            f"{threshold:.2f} (best guess: {verdict.label})"
        )


class Overall(Enum):
    Defective = "Defective"
    NonDefective = "NonDefective"


@dataclass(frozen=True)
class InspectionResult:
    instrument: InstrumentClass
    instrument_confidence: float
    defects: tuple[tuple[DefectClass, float], ...]
    overall: Overall
    backend_ids: tuple[str, str]
    timing_ms: tuple[float, float]

    def to_json(self) -> dict:
        return {
            "instrument": self.instrument.value,
            "instrument_confidence": self.instrument_confidence,
            "defects": [[d.value, c] for d, c in self.defects],
            "overall": self.overall.value,
            "backend_ids": list(self.backend_ids),
            "timing_ms": {"instrument": self.timing_ms[0], "defects": self.timing_ms[1]},
        }


# ---------------------------------------------------------------------------
# Backends


class Backend(Protocol):
    backend_id: str
    thread_safe: bool

    def predict(self, img: Raster) -> list[ClassifierVerdict]: ...


@dataclass(frozen=True)
class Stage1:
    pass


@dataclass(frozen=True)
class Stage2:
    instrument: InstrumentClass


class _Serialized:
    """Wrapper that funnels a non-thread-safe backend through one lock."""

    def __init__(self, impl: Backend):
        self._impl = impl
        self._lock = threading.Lock()

    @property
    def backend_id(self) -> str:
        return self._impl.backend_id

    @property
    def thread_safe(self) -> bool:
        return True

    def predict(self, img: Raster) -> list[ClassifierVerdict]:
        with self._lock:
            return self._impl.predict(img)


class BackendRegistry:
    def __init__(self) -> None:
        self._entries: dict[str, tuple[object, Backend]] = {}
        self._lock = threading.Lock()

    def register(self, backend_id: str, kind: object, impl: Backend) -> None:
        if not isinstance(kind, (Stage1, Stage2)):
            raise ValueError(f"kind must be Stage1 or Stage2, got {kind!r}")
        with self._lock:
            if backend_id in self._entries:
                raise DuplicateBackend(f"backend id {backend_id!r} already registered")
            if not getattr(impl, "thread_safe", False):
                impl = _Serialized(impl)
            self._entries[backend_id] = (kind, impl)

    def resolve(self, backend_id: str) -> Backend:
        try:
            return self._entries[backend_id][1]
        except KeyError:
            raise UnknownBackend(f"no backend registered under {backend_id!r}") from None

    def kind_of(self, backend_id: str) -> object:
        try:
            return self._entries[backend_id][0]
        except KeyError:
            raise UnknownBackend(f"no backend registered under {backend_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._entries)


REGISTRY = BackendRegistry()


def register_backend(
    backend_id: str, kind: object, impl: Backend, registry: Optional[BackendRegistry] = None
) -> None:
    (registry or REGISTRY).register(backend_id, kind, impl)


class TagStubBackend:
    """Deterministic reference backend that echoes embedded fixture tags.

    Fixture images carry a JSON payload under the surgscan_tags text key:
    {"instrument": <label>, "instrument_confidence": <c>, "defects":
    [[<label>, <c>], ...]}. One instance can serve either stage.
    """

    thread_safe = True

    def __init__(self, backend_id: str, stage: str):
        if stage not in ("instrument", "defects"):
            raise ValueError(f"stage must be 'instrument' or 'defects', got {stage!r}")
        self.backend_id = backend_id
        self.stage = stage

    def predict(self, img: Raster) -> list[ClassifierVerdict]:
        raw = img.tag(TAGS_KEY)
        if raw is None:
            raise BackendFailure(f"image carries no {TAGS_KEY} payload")
        try:
            tags = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BackendFailure(f"malformed {TAGS_KEY} payload: {exc}") from exc
        if self.stage == "instrument":
            label = tags.get("instrument")
            if label is None:
                raise BackendFailure("fixture tags carry no instrument label")
            return [ClassifierVerdict(str(label), float(tags.get("instrument_confidence", 1.0)))]
        return [ClassifierVerdict(str(label), float(conf)) for label, conf in tags.get("defects", [])]


class ExternalProcessBackend:
    """Adapter for any detector runnable as `<cmd> <image-path>`.

    The process receives a PNG path, prints one `label<TAB>confidence` line
    per verdict (empty output means none), and must exit 0. Subprocesses are
    not reentrant per instance, so this backend is serialized by default.
    """

    thread_safe = False

    def __init__(self, backend_id: str, command: Sequence[str], timeout_s: float = 30.0):
        if not command:
            raise ValueError("command must be nonempty")
        self.backend_id = backend_id
        self.command = tuple(str(part) for part in command)
        self.timeout_s = timeout_s

    def predict(self, img: Raster) -> list[ClassifierVerdict]:
        with tempfile.TemporaryDirectory(prefix="surgscan-backend-") as tmp:
            path = Path(tmp) / "frame.png"
            encode_png(img, path)
            try:
                proc = subprocess.run(
                    [*self.command, str(path)],
                    capture_output=True,
                    text=True,
                    timeout=self.timeout_s,
                )
            except subprocess.TimeoutExpired as exc:
                raise BackendFailure(f"{self.backend_id}: timed out after {self.timeout_s}s") from exc
            except OSError as exc:
                raise BackendFailure(f"{self.backend_id}: cannot launch {self.command[0]}: {exc}") from exc
        if proc.returncode != 0:
            detail = proc.stderr.strip() or f"exit code {proc.returncode}"
            raise BackendFailure(f"{self.backend_id}: {detail}")
        verdicts = []
        for line_no, line in enumerate(proc.stdout.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise BackendFailure(
                    f"{self.backend_id}: stdout line {line_no} is not 'label<TAB>confidence'"
                )
            try:
                verdicts.append(ClassifierVerdict(parts[0], float(parts[1])))
            except ValueError as exc:
                raise BackendFailure(f"{self.backend_id}: stdout line {line_no}: {exc}") from exc
        return verdicts


# ---------------------------------------------------------------------------
# Cascade


@dataclass(frozen=True)
class CascadeConfig:
    stage1_backend: str
    defect_backends: Mapping[InstrumentClass, str] = field(default_factory=dict)
    instrument_threshold: float = 0.50
    defect_threshold: float = 0.50

    def __post_init__(self) -> None:
        object.__setattr__(self, "defect_backends", dict(self.defect_backends))
        for name in ("instrument_threshold", "defect_threshold"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")


def validate_config(cfg: CascadeConfig, registry: Optional[BackendRegistry] = None) -> None:
    """Check every referenced backend exists and serves the right stage."""
    registry = registry or REGISTRY
    kind = registry.kind_of(cfg.stage1_backend)
    if not isinstance(kind, Stage1):
        raise ValueError(f"backend {cfg.stage1_backend!r} is not a stage-1 backend")
    for instrument, backend_id in cfg.defect_backends.items():
        kind = registry.kind_of(backend_id)
        if not isinstance(kind, Stage2) or kind.instrument is not instrument:
            raise ValueError(f"backend {backend_id!r} does not serve {instrument.value}")


def _call(backend: Backend, img: Raster) -> list[ClassifierVerdict]:
    try:
        return backend.predict(img)
    except SurgScanError:
        raise
    except Exception as exc:
        raise BackendFailure(f"{getattr(backend, 'backend_id', backend)!r} failed: {exc}") from exc


def classify_instrument(img: Raster, backend: Backend) -> ClassifierVerdict:
    """Stage 1: the backend's top label, canonicalized to the vocabulary."""
    verdicts = _call(backend, img)
    if not verdicts:
        raise BackendFailure(f"{backend.backend_id}: no instrument verdict returned")
    top = max(verdicts, key=lambda v: v.confidence)
    try:
        instrument = parse_instrument(top.label)
    except UnknownInstrument as exc:
        raise UnknownLabel(str(exc)) from exc
    return ClassifierVerdict(instrument.value, top.confidence)


def classify_defects(
    img: Raster, instrument: InstrumentClass, backend: Backend
) -> list[tuple[DefectClass, float]]:
    """Stage 2: all defect verdicts, canonicalized; empty means clean."""
    verdicts = _call(backend, img)
    out = []
    for verdict in verdicts:
        try:
            defect = parse_defect(verdict.label)
        except UnknownDefect as exc:
            raise UnknownLabel(str(exc)) from exc
        out.append((defect, verdict.confidence))
    return out


def inspect(
    img: Raster, cfg: CascadeConfig, registry: Optional[BackendRegistry] = None
) -> InspectionResult:
    """Run the full cascade on one image."""
    registry = registry or REGISTRY
    stage1 = registry.resolve(cfg.stage1_backend)

    t0 = time.perf_counter()
    verdict = classify_instrument(img, stage1)
    stage1_ms = (time.perf_counter() - t0) * 1000.0
    if verdict.confidence < cfg.instrument_threshold:
        raise LowConfidenceInstrument(verdict, cfg.instrument_threshold)
    instrument = parse_instrument(verdict.label)

    stage2_id = cfg.defect_backends.get(instrument)
    if stage2_id is None:
        raise NoBackendForInstrument(f"no defect backend configured for {instrument.value}")
    stage2 = registry.resolve(stage2_id)

    t1 = time.perf_counter()
    raw_defects = classify_defects(img, instrument, stage2)
    stage2_ms = (time.perf_counter() - t1) * 1000.0

    kept = tuple((d, c) for d, c in raw_defects if c >= cfg.defect_threshold)
    defective = any(d is not DefectClass.NonDefective for d, _ in kept)
    return InspectionResult(
        instrument=instrument,
        instrument_confidence=verdict.confidence,
        defects=kept,
        overall=Overall.Defective if defective else Overall.NonDefective,
        backend_ids=(cfg.stage1_backend, stage2_id),
        timing_ms=(stage1_ms, stage2_ms),
    )


def _instrument_slug(instrument: InstrumentClass) -> str:
    return instrument.value.lower().replace(" ", "-")


def register_stub_cascade(registry: Optional[BackendRegistry] = None) -> CascadeConfig:
    """Register the tag-echo stub for every stage and return a full config.

    Each instrument gets its own stage-2 backend id so dispatch is observable
    per instrument even though the stub implementation is shared.
    """
    registry = registry or REGISTRY
    registry.register("stub-instrument", Stage1(), TagStubBackend("stub-instrument", "instrument"))
    mapping = {}
    for instrument in InstrumentClass:
        backend_id = f"stub-defect-{_instrument_slug(instrument)}"
        registry.register(
            backend_id, Stage2(instrument), TagStubBackend(backend_id, "defects")
        )
        mapping[instrument] = backend_id
    cfg = CascadeConfig(stage1_backend="stub-instrument", defect_backends=mapping)
    validate_config(cfg, registry)
    return cfg
