"""Corpus bookkeeping: manifests, alignments, speaker factors and statistics,
pairing strategies and the binary feature archive.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AllSilence,
    ChannelMismatch,
    CorruptArchive,
    DuplicateId,
    EmptyAlignment,
    EmptyInput,
    EmptySide,
    ManifestError,
    MissingWordIds,
    WordMismatch,
    ZeroDuration,
)
from .signal import Spectrogram

GROUPS = ("control", "target")
DEFAULT_SILENCE = frozenset({"sil", "sp", "spn", "noise"})
STD_FLOOR = 1e-8
MEAN_BASES = "MEAN_BASES"
PAIR_STRATEGIES = ("rand", "avg", "exhaustive", "parallel")


# --------------------------------------------------------------------------
# manifests and alignments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Utterance:
    utt_id: str
    speaker_id: str
    group: str
    audio_path: str
    duration: float
    word_id: str | None = None
    tag: str | None = None

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ManifestError(f"{self.utt_id}: group must be one of {GROUPS}, got {self.group!r}")
        if not self.duration > 0:
            raise ManifestError(f"{self.utt_id}: duration must be positive")


_MANIFEST_FIELDS = {"id": "utt_id", "speaker": "speaker_id", "group": "group",
                    "path": "audio_path", "duration": "duration", "word": "word_id", "tag": "tag"}


def read_manifest(path) -> list[Utterance]:
    """Load a JSON-lines manifest. Relative audio paths resolve against the manifest's folder."""
    path = Path(path)
    base = path.parent
    utts, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            unknown = set(rec) - set(_MANIFEST_FIELDS)
            if unknown:
                raise ManifestError(f"{path}:{lineno}: unknown fields {sorted(unknown)}")
            missing = {"id", "speaker", "group", "path", "duration"} - set(rec)
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            kwargs = {_MANIFEST_FIELDS[k]: v for k, v in rec.items()}
            audio = Path(kwargs["audio_path"])
            kwargs["audio_path"] = str(audio if audio.is_absolute() else base / audio)
            kwargs["duration"] = float(kwargs["duration"])
            utt = Utterance(**kwargs)
            if utt.utt_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate utterance id {utt.utt_id!r}")
            seen.add(utt.utt_id)
            utts.append(utt)
    return utts


def write_manifest(path, utts):
    inverse = {v: k for k, v in _MANIFEST_FIELDS.items()}
    with open(path, "w", encoding="utf-8") as fh:
        for u in utts:
            rec = {inverse[k]: v for k, v in asdict(u).items() if v is not None}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass(frozen=True)
class PhonemeAlignment:
    utt_id: str
    segments: tuple  # of (label, start_s, end_s)

    def __post_init__(self):
        segs = tuple((str(p), float(s), float(e)) for p, s, e in self.segments)
        prev_end = -np.inf
        for label, start, end in segs:
            if not end > start:
                raise ValueError(f"{self.utt_id}: segment {label} has end <= start")
            if start < prev_end - 1e-9:
                raise ValueError(f"{self.utt_id}: segments overlap or are unsorted at {label}")
            prev_end = end
        object.__setattr__(self, "segments", segs)

    def scaled(self, k: float) -> "PhonemeAlignment":
        return PhonemeAlignment(self.utt_id, [(p, s * k, e * k) for p, s, e in self.segments])


def read_alignments(path) -> dict[str, PhonemeAlignment]:
    """Read ``utt_id phoneme start_s end_s`` lines from a file or every file in a directory."""
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path]
    segs: dict[str, list] = {}
    for f in files:
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                if len(parts) != 4:
                    raise ValueError(f"{f}:{lineno}: expected 'utt_id phoneme start end'")
                utt, label, start, end = parts
                segs.setdefault(utt, []).append((label, float(start), float(end)))
    return {utt: PhonemeAlignment(utt, sorted(s, key=lambda t: t[1])) for utt, s in segs.items()}


def write_alignments(path, aligns):
    with open(path, "w", encoding="utf-8") as fh:
        for a in aligns:
            for label, start, end in a.segments:
                fh.write(f"{a.utt_id} {label} {start!r} {end!r}\n")


# --------------------------------------------------------------------------
# speaker-dependent factors
# --------------------------------------------------------------------------

def mean_phone_duration(aligns, silence=DEFAULT_SILENCE) -> float:
    """Token-level mean duration of all non-silence phoneme segments."""
    durations = [e - s for a in aligns for p, s, e in a.segments]
    if not durations:
        raise EmptyAlignment("no phoneme segments")
    speech = [e - s for a in aligns for p, s, e in a.segments if p.lower() not in silence]
    if not speech:
        raise AllSilence("every segment carries a silence/noise label")
    return float(np.mean(speech))


def estimate_sd_factor(target_aligns, control_aligns, silence=DEFAULT_SILENCE) -> float:
    """Speaker-dependent factor: mean control phone duration over the target speaker's.

    A slow target speaker gets a factor below one.
    """
    if not target_aligns or not control_aligns:
        raise EmptyAlignment("both target and control alignments are required")
    return mean_phone_duration(control_aligns, silence) / mean_phone_duration(target_aligns, silence)


def pair_scale_factor(control: Utterance, target: Utterance, parallel: bool = False) -> float:
    """Tempo factor stretching ``control`` to the duration of ``target``.

    ``tempo_perturb`` maps length L to ``factor * L``, so the factor is
    target duration over control duration.
    """
    if not (control.duration > 0 and target.duration > 0):
        raise ZeroDuration("utterance durations must be positive")
    if parallel and control.word_id != target.word_id:
        raise WordMismatch(f"{control.utt_id} ({control.word_id}) vs {target.utt_id} ({target.word_id})")
    return target.duration / control.duration


# --------------------------------------------------------------------------
# speaker-level normalisation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeakerStats:
    mean: np.ndarray
    std: np.ndarray


def _values(spec):
    return np.asarray(spec.values if isinstance(spec, Spectrogram) else spec, dtype=np.float64)


def compute_speaker_stats(specs) -> SpeakerStats:
    """Per-channel mean and population std pooled over every frame of every utterance."""
    mats = [_values(s) for s in specs]
    if not mats:
        raise EmptyInput("no spectrograms given")
    channels = {m.shape[0] for m in mats}
    if len(channels) != 1:
        raise ChannelMismatch(f"inconsistent channel counts {sorted(channels)}")
    pooled = np.concatenate(mats, axis=1)
    mean = pooled.mean(axis=1)
    std = np.maximum(pooled.std(axis=1), STD_FLOOR)
    return SpeakerStats(mean, std)


def normalize_with(spec, stats: SpeakerStats):
    v = _values(spec)
    if v.shape[0] != stats.mean.shape[0]:
        raise ChannelMismatch(f"spectrogram has {v.shape[0]} channels, stats {stats.mean.shape[0]}")
    out = (v - stats.mean[:, None]) / stats.std[:, None]
    return spec.with_values(out) if isinstance(spec, Spectrogram) else out


def normalize_speaker(specs):
    """Zero-mean, unit-variance normalise a speaker's utterances with their pooled stats."""
    specs = list(specs)
    stats = compute_speaker_stats(specs)
    return [normalize_with(s, stats) for s in specs], stats


# --------------------------------------------------------------------------
# speaker profiles
# --------------------------------------------------------------------------

@dataclass
class SpeakerProfile:
    speaker_id: str
    sd_factor: float
    feat_mean: np.ndarray | None = None
    feat_std: np.ndarray | None = None

    def __post_init__(self):
        if not 0 < self.sd_factor < 10:
            raise ValueError(f"{self.speaker_id}: sd_factor {self.sd_factor} outside (0, 10)")
        if self.feat_std is not None and np.any(np.asarray(self.feat_std) <= 0):
            raise ValueError(f"{self.speaker_id}: feat_std must be strictly positive")


def save_profiles(path, profiles, control_mean_duration=None):
    doc = {"control_mean_phone_duration": control_mean_duration, "speakers": {}}
    for p in sorted(profiles, key=lambda p: p.speaker_id):
        rec = {"sd_factor": p.sd_factor}
        if p.feat_mean is not None:
            rec["feat_mean"] = [float(v) for v in p.feat_mean]
            rec["feat_std"] = [float(v) for v in p.feat_std]
        doc["speakers"][p.speaker_id] = rec
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_profiles(path) -> dict[str, SpeakerProfile]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    out = {}
    for spk, rec in doc["speakers"].items():
        mean = rec.get("feat_mean")
        std = rec.get("feat_std")
        out[spk] = SpeakerProfile(spk, float(rec["sd_factor"]),
                                  None if mean is None else np.asarray(mean),
                                  None if std is None else np.asarray(std))
    return out


# --------------------------------------------------------------------------
# pairing
# --------------------------------------------------------------------------

@dataclass
class PairManifest:
    strategy: str
    pairs: list = field(default_factory=list)  # (source_utt_id, target_ref)
    seed: int = 0
    target_speaker: str | None = None

    def to_jsonl(self) -> str:
        head = {"strategy": self.strategy, "seed": self.seed, "target_speaker": self.target_speaker,
                "count": len(self.pairs)}
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps([src, ref]) for src, ref in self.pairs]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "PairManifest":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        pairs = [tuple(json.loads(ln)) for ln in lines[1:]]
        if len(pairs) != head["count"]:
            raise ManifestError(f"pair manifest declares {head['count']} pairs, holds {len(pairs)}")
        return cls(head["strategy"], pairs, head["seed"], head.get("target_speaker"))

    def save(self, path):
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PairManifest":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def make_pairs(strategy: str, control, target, seed: int = 0) -> PairManifest:
    """Pair control utterances with one target speaker's utterances.

    rand: each control utterance once, with a seeded random target utterance.
    avg: each control utterance with the target speaker's mean spectral bases.
    exhaustive: every control/target combination.
    parallel: each control utterance with every target utterance of the same word.
    """
    if strategy not in PAIR_STRATEGIES:
        raise ValueError(f"unknown pairing strategy {strategy!r}")
    control, target = list(control), list(target)
    if not control or not target:
        raise EmptySide("both control and target utterance lists must be non-empty")
    speakers = sorted({t.speaker_id for t in target})
    spk = speakers[0] if len(speakers) == 1 else None

    if strategy == "rand":
        rng = np.random.default_rng(seed)
        picks = rng.integers(0, len(target), size=len(control))
        pairs = [(c.utt_id, target[int(i)].utt_id) for c, i in zip(control, picks)]
    elif strategy == "avg":
        pairs = [(c.utt_id, MEAN_BASES) for c in control]
    elif strategy == "exhaustive":
        pairs = [(c.utt_id, t.utt_id) for c in control for t in target]
    else:
        if any(u.word_id is None for u in control + target):
            raise MissingWordIds("parallel pairing needs word_id on every utterance")
        pairs = [(c.utt_id, t.utt_id) for c in control for t in target if t.word_id == c.word_id]
    return PairManifest(strategy, pairs, int(seed), spk)


# --------------------------------------------------------------------------
# feature archive
# --------------------------------------------------------------------------

ARCHIVE_MAGIC = b"DAFA"
ARCHIVE_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_DIMS = struct.Struct("<II")


def _record_items(features):
    items = features.items() if hasattr(features, "items") else features
    seen = set()
    for utt_id, spec in items:
        if utt_id in seen:
            raise DuplicateId(f"duplicate record id {utt_id!r}")
        seen.add(utt_id)
        yield utt_id, spec


def archive_bytes(features) -> bytes:
    """Serialise ``{utt_id: C x T matrix}`` (or id/matrix pairs) to archive bytes."""
    chunks = []
    count = 0
    for utt_id, spec in _record_items(features):
        mat = np.asarray(spec.values if isinstance(spec, Spectrogram) else spec)
        if mat.ndim != 2:
            raise ValueError(f"{utt_id}: expected a 2-D matrix, got shape {mat.shape}")
        key = utt_id.encode("utf-8")
        if len(key) > 0xFFFF:
            raise ValueError(f"record id too long ({len(key)} bytes)")
        payload = np.ascontiguousarray(mat, dtype="<f4").tobytes()
        chunks += [struct.pack("<H", len(key)), key, _DIMS.pack(*mat.shape), payload,
                   struct.pack("<I", zlib.crc32(payload))]
        count += 1
    return _HEADER.pack(ARCHIVE_MAGIC, ARCHIVE_VERSION, count) + b"".join(chunks)


def archive_write(path, features):
    """Write a feature archive atomically (temp file + rename in the target folder)."""
    data = archive_bytes(features)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def archive_parse(data: bytes) -> dict[str, np.ndarray]:
    view = memoryview(data)
    if len(view) < _HEADER.size:
        raise CorruptArchive("archive shorter than its header")
    magic, version, count = _HEADER.unpack_from(view, 0)
    if magic != ARCHIVE_MAGIC:
        raise CorruptArchive(f"bad magic {bytes(magic)!r}")
    if version != ARCHIVE_VERSION:
        raise CorruptArchive(f"unsupported archive version {version}")
    pos = _HEADER.size
    out: dict[str, np.ndarray] = {}

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CorruptArchive(f"archive truncated at byte {len(view)} (record {len(out)})")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    for _ in range(count):
        (klen,) = struct.unpack("<H", take(2))
        try:
            utt_id = bytes(take(klen)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptArchive("record id is not valid UTF-8") from exc
        rows, cols = _DIMS.unpack(take(_DIMS.size))
        payload = take(4 * rows * cols)
        (crc,) = struct.unpack("<I", take(4))
        if zlib.crc32(payload) != crc:
            raise CorruptArchive(f"checksum mismatch in record {utt_id!r}")
        if utt_id in out:
            raise CorruptArchive(f"duplicate record id {utt_id!r}")
        out[utt_id] = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)
    if pos != len(view):
        raise CorruptArchive(f"{len(view) - pos} trailing bytes after {count} records")
    return out


def archive_read(path) -> dict[str, np.ndarray]:
    """Read a whole archive; any structural damage raises :class:`CorruptArchive`."""
    with open(path, "rb") as fh:
        return archive_parse(fh.read())


def provenance_path(archive_path) -> Path:
    return Path(str(archive_path) + ".prov.jsonl")


def write_provenance(archive_path, records):
    """Sidecar JSON-lines file: one ``{"id", "tag", "stages"}`` object per archive record."""
    with open(provenance_path(archive_path), "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_provenance(archive_path) -> list[dict]:
    with open(provenance_path(archive_path), encoding="utf-8") as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]


def si_expansion(utts, factors):
    """(utt, factor, record_id) for every speaker-independent perturbation copy."""
    return [(u, f, f"sp{f:g}-{u.utt_id}") for u in utts for f in factors]
