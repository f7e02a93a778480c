"""Command-line driver: ``dysaug <verb> [--config FILE] [--key=value ...]``.

Exit codes: 0 success, 1 per-item failures (the rest of the work is still
written), 2 configuration or validation errors. Structured log records go to
stderr as JSON lines; command summaries go to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config, require
from .corpus import (
    archive_parse,
    archive_read,
    archive_write,
    compute_speaker_stats,
    estimate_sd_factor,
    load_profiles,
    make_pairs,
    mean_phone_duration,
    normalize_with,
    pair_scale_factor,
    provenance_path,
    read_alignments,
    read_manifest,
    read_provenance,
    SpeakerProfile,
    save_profiles,
    write_provenance,
)
from .errors import (
    ConfigError,
    CorruptArchive,
    CountMismatch,
    DysaugError,
    ManifestError,
    MissingAlignments,
    MissingCheckpoint,
    UnknownSpeakerInPairing,
)
from .gan import DcganModel, SbgModel, dcgan_generate, sbg_generate, train_dcgan, train_sbg
from .nn import TrainSchedule
from .nn.checkpoint import parse_checkpoint
from .signal import MelConfig, WsolaConfig, mel_fbank, read_wav, speed_perturb, tempo_perturb
from .subspace import svd_decompose

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
# failures that concern one input file rather than the whole run
ITEM_ERRORS = (OSError, EOFError, ValueError, DysaugError)

log = logging.getLogger("dysaug")


class JsonLineFormatter(logging.Formatter):
    def format(self, record):
        rec = {"level": record.levelname.lower(), "event": record.getMessage()}
        rec.update(getattr(record, "fields", {}))
        return json.dumps(rec, sort_keys=True, default=str)


def _setup_logging(verbose: bool):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def _info(event, **fields):
    log.info(event, extra={"fields": fields})


def _error(event, **fields):
    log.error(event, extra={"fields": fields})


def _emit(summary):
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------

def _mel(cfg) -> MelConfig:
    return MelConfig(**cfg["mel"])


def _wsola(cfg) -> WsolaConfig:
    return WsolaConfig(**cfg["wsola"])


def _schedule(cfg) -> TrainSchedule:
    return TrainSchedule(seed=cfg["seed"], **cfg["schedule"])


def _split(utts):
    control = [u for u in utts if u.group == "control"]
    targets: dict[str, list] = {}
    for u in utts:
        if u.group == "target":
            targets.setdefault(u.speaker_id, []).append(u)
    return control, targets


def _target_speakers(cfg, targets, profiles=None):
    speakers = sorted(targets)
    if profiles is not None:
        speakers = sorted(set(speakers) | set(profiles))
    wanted = cfg["target_speakers"]
    if wanted is not None:
        unknown = sorted(set(wanted) - set(speakers))
        if unknown:
            raise ConfigError(f"target_speakers not found in the inputs: {unknown}")
        speakers = [s for s in speakers if s in wanted]
    return speakers


def _features(utt, mel_cfg, cache=None):
    if cache is not None and utt.utt_id in cache:
        return cache[utt.utt_id].astype(np.float64)
    return mel_fbank(read_wav(utt.audio_path), mel_cfg).values


def _perturb_wave(wave, mode, factor, wsola_cfg):
    if mode == "speed":
        return speed_perturb(wave, factor)
    return tempo_perturb(wave, factor, wsola_cfg)


def _sd_factor(mode, alpha):
    # α_j is a speed factor (length / α); the tempo convention multiplies length
    return alpha if mode == "speed" else 1.0 / alpha


def _load_dcgan(cfg, speaker) -> DcganModel:
    folder = cfg["dcgan"]["checkpoints"]
    if folder is None:
        raise MissingCheckpoint("dcgan.checkpoints is not set")
    path = Path(folder) / f"{speaker}.dgpt"
    if not path.is_file():
        raise MissingCheckpoint(f"no DCGAN checkpoint for speaker {speaker!r} at {path}")
    return DcganModel.load(path)


def _load_sbg(cfg) -> SbgModel:
    path = cfg["sbg"]["checkpoint"]
    if path is None or not Path(path).is_file():
        raise MissingCheckpoint(f"SBG checkpoint {path!r} not found")
    return SbgModel.load(path)


def _write_archive(path, records, provenance=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    archive_write(path, records)
    if provenance is not None:
        write_provenance(path, provenance)


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------

def cmd_extract(cfg) -> int:
    require(cfg, "manifest", "output")
    mel_cfg = _mel(cfg)
    records, errors, frames = {}, [], 0
    for utt in read_manifest(cfg["manifest"]):
        try:
            values = _features(utt, mel_cfg)
        except ITEM_ERRORS as exc:
            errors.append({"id": utt.utt_id, "error": str(exc)})
            _error("extract_failed", id=utt.utt_id, error=str(exc))
            continue
        records[utt.utt_id] = values.astype(np.float32)
        frames += values.shape[1]
    _write_archive(cfg["output"], records)
    _emit({"command": "extract", "records": len(records), "total_frames": frames,
           "n_mels": mel_cfg.n_mels, "errors": errors, "output": str(cfg["output"])})
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_estimate_factors(cfg) -> int:
    require(cfg, "manifest", "alignments", "output")
    utts = read_manifest(cfg["manifest"])
    control, targets = _split(utts)
    if not targets:
        raise ConfigError("manifest has no target-group utterances")
    aligns = read_alignments(cfg["alignments"])
    silence = frozenset(s.lower() for s in cfg["silence_labels"])
    control_aligns = [aligns[u.utt_id] for u in control if u.utt_id in aligns]
    if not control_aligns:
        raise MissingAlignments(["<control>"])
    d_control = mean_phone_duration(control_aligns, silence)
    cache = archive_read(cfg["features"]) if cfg["features"] else None

    profiles, missing = [], []
    for spk in _target_speakers(cfg, targets):
        spk_aligns = [aligns[u.utt_id] for u in targets[spk] if u.utt_id in aligns]
        if not spk_aligns:
            missing.append(spk)
            _error("missing_alignments", speaker=spk)
            continue
        alpha = estimate_sd_factor(spk_aligns, control_aligns, silence)
        mean = std = None
        if cache is not None:
            stats = compute_speaker_stats([cache[u.utt_id] for u in targets[spk] if u.utt_id in cache])
            mean, std = stats.mean, stats.std
        profiles.append(SpeakerProfile(spk, alpha, mean, std))
        _info("sd_factor", speaker=spk, alpha=alpha)
    if profiles:
        save_profiles(cfg["output"], profiles, d_control)
    _emit({"command": "estimate-factors", "control_mean_phone_duration": d_control,
           "factors": {p.speaker_id: p.sd_factor for p in profiles}, "missing": missing,
           "output": str(cfg["output"]) if profiles else None})
    return EXIT_PARTIAL if missing else EXIT_OK


def _si_items(utts, factors, mode):
    prefix = "sp" if mode == "speed" else "tp"
    return [(u, float(f), f"{prefix}{f:g}-{u.utt_id}") for u in utts for f in factors]


def _sd_items(control, speakers, profiles, mode):
    return [(u, _sd_factor(mode, profiles[spk].sd_factor), f"{spk}-{mode}-{u.utt_id}", spk)
            for spk in speakers for u in control]


def _run_perturbations(items, mode, mel_cfg, wsola_cfg, stage):
    """items: (utt, factor, record_id, speaker-or-None). Returns records, provenance, errors."""
    records, prov, errors, waves = {}, [], [], {}
    for utt, factor, rid, spk in items:
        try:
            if utt.utt_id not in waves:
                waves[utt.utt_id] = read_wav(utt.audio_path)
            out = _perturb_wave(waves[utt.utt_id], mode, factor, wsola_cfg)
            values = mel_fbank(out, mel_cfg).values
        except ITEM_ERRORS as exc:
            errors.append({"id": rid, "error": str(exc)})
            _error("perturb_failed", id=rid, error=str(exc))
            continue
        records[rid] = values.astype(np.float32)
        step = {"stage": f"{mode}_perturb", "alpha": factor, "kind": stage}
        if spk is not None:
            step["speaker"] = spk
        prov.append({"id": rid, "source": utt.utt_id, "stages": [step]})
    return records, prov, errors


def cmd_perturb(cfg) -> int:
    require(cfg, "manifest", "output")
    utts = read_manifest(cfg["manifest"])
    control, targets = _split(utts)
    mode = cfg["perturb"]["mode"]
    if cfg["perturb"]["factors"] == "si":
        pool = [u for spk in _target_speakers(cfg, targets) for u in targets[spk]]
        if cfg["target_speakers"] is None:
            pool = utts
        items = [(u, f, rid, None) for u, f, rid in _si_items(pool, cfg["si_factors"], mode)]
        kind = "speaker_independent"
    else:
        require(cfg, "profiles")
        profiles = load_profiles(cfg["profiles"])
        speakers = _target_speakers(cfg, {}, profiles)
        items = _sd_items(control, speakers, profiles, mode)
        kind = "speaker_dependent"
    records, prov, errors = _run_perturbations(items, mode, _mel(cfg), _wsola(cfg), kind)
    _write_archive(cfg["output"], records, prov)
    _emit({"command": "perturb", "mode": mode, "factors": cfg["perturb"]["factors"],
           "expected": len(items), "records": len(records), "errors": errors,
           "output": str(cfg["output"])})
    return EXIT_PARTIAL if errors else EXIT_OK


def _pair_manifests(cfg, control, targets, strategy):
    out = {}
    for spk in _target_speakers(cfg, targets):
        out[spk] = make_pairs(strategy, control, targets[spk], cfg["seed"])
        out[spk].target_speaker = spk
    return out


def cmd_pair(cfg) -> int:
    require(cfg, "manifest", "output")
    control, targets = _split(read_manifest(cfg["manifest"]))
    strategy = cfg["pairing"]["strategy"]
    manifests = _pair_manifests(cfg, control, targets, strategy)
    folder = Path(cfg["output"])
    folder.mkdir(parents=True, exist_ok=True)
    for spk, manifest in manifests.items():
        manifest.save(folder / f"{spk}.pairs.jsonl")
    _emit({"command": "pair", "strategy": strategy, "seed": cfg["seed"],
           "pairs": {spk: len(m.pairs) for spk, m in manifests.items()}, "output": str(folder)})
    return EXIT_OK


def _dcgan_training_pairs(cfg, control, spk_targets, mel_cfg, wsola_cfg):
    by_id = {u.utt_id: u for u in control + spk_targets}
    manifest = make_pairs("parallel", control, spk_targets, cfg["seed"])
    mode = cfg["dcgan"]["input"]
    inputs, outputs, errors = [], [], []
    waves = {}
    for src, ref in manifest.pairs:
        c, t = by_id[src], by_id[ref]
        try:
            ratio = pair_scale_factor(c, t, parallel=True)
            if src not in waves:
                waves[src] = read_wav(c.audio_path)
            # speed factor 1/ratio lengthens by ratio, like tempo factor ratio
            factor = ratio if mode == "tempo" else 1.0 / ratio
            xc = mel_fbank(_perturb_wave(waves[src], mode, factor, wsola_cfg), mel_cfg).values
            xt = mel_fbank(read_wav(t.audio_path), mel_cfg).values
        except ITEM_ERRORS as exc:
            errors.append({"id": f"{src}|{ref}", "error": str(exc)})
            _error("pair_failed", control=src, target=ref, error=str(exc))
            continue
        T = min(xc.shape[1], xt.shape[1])  # durations agree to within a frame
        inputs.append(xc[:, :T])
        outputs.append(xt[:, :T])
    if not inputs:
        return [], errors
    c_stats, t_stats = compute_speaker_stats(inputs), compute_speaker_stats(outputs)
    pairs = [(normalize_with(a, c_stats), normalize_with(b, t_stats)) for a, b in zip(inputs, outputs)]
    return pairs, errors


def cmd_train_dcgan(cfg) -> int:
    require(cfg, "manifest", "dcgan.checkpoints")
    control, targets = _split(read_manifest(cfg["manifest"]))
    if not control or not targets:
        raise ConfigError("DCGAN training needs control and target utterances")
    folder = Path(cfg["dcgan"]["checkpoints"])
    folder.mkdir(parents=True, exist_ok=True)
    mel_cfg, wsola_cfg, schedule = _mel(cfg), _wsola(cfg), _schedule(cfg)
    trained, errors = {}, []
    for spk in _target_speakers(cfg, targets):
        pairs, errs = _dcgan_training_pairs(cfg, control, targets[spk], mel_cfg, wsola_cfg)
        errors += errs
        if not pairs:
            _error("no_training_pairs", speaker=spk)
            errors.append({"id": spk, "error": "no usable parallel pairs"})
            continue
        _info("train_dcgan_start", speaker=spk, pairs=len(pairs), iters=schedule.max_iters)
        model, report = train_dcgan(pairs, schedule, window=cfg["dcgan"]["window"],
                                    target_speaker=spk,
                                    non_saturating=cfg["dcgan"]["loss"] == "non_saturating",
                                    generator_init=cfg["dcgan"]["generator_init"],
                                    ema_decay=float(cfg["dcgan"]["ema_decay"]))
        model.meta.update(seed=cfg["seed"], input=cfg["dcgan"]["input"], pairs=len(pairs))
        model.save(folder / f"{spk}.dgpt")
        report.save(folder / f"{spk}.report.tsv")
        trained[spk] = {"pairs": len(pairs), "final_d_acc": float(report.d_acc[-1]) if len(report) else None}
    _emit({"command": "train-dcgan", "speakers": trained, "errors": errors, "output": str(folder)})
    return EXIT_PARTIAL if errors else EXIT_OK


def _bases(values):
    return svd_decompose(values).U


def cmd_train_sbg(cfg) -> int:
    require(cfg, "manifest", "sbg.checkpoint")
    control, targets = _split(read_manifest(cfg["manifest"]))
    if not control or not targets:
        raise ConfigError("SBG training needs control and target utterances")
    strategy = cfg["pairing"]["strategy"]
    if strategy == "parallel":
        raise ConfigError("SBG training takes rand, avg or exhaustive pairing")
    mel_cfg = _mel(cfg)
    cache = archive_read(cfg["features"]) if cfg["features"] else None
    errors = []

    def bases_of(utts):
        out = {}
        for u in utts:
            try:
                out[u.utt_id] = _bases(_features(u, mel_cfg, cache))
            except (KeyError, *ITEM_ERRORS) as exc:
                errors.append({"id": u.utt_id, "error": str(exc)})
                _error("bases_failed", id=u.utt_id, error=str(exc))
        return out

    control_bases = bases_of(control)
    speakers = _target_speakers(cfg, targets)
    target_bases = {spk: bases_of(targets[spk]) for spk in speakers}
    ok_control = [u for u in control if u.utt_id in control_bases]
    manifests = []
    for spk in speakers:
        ok_targets = [u for u in targets[spk] if u.utt_id in target_bases[spk]]
        if not ok_targets:
            raise ConfigError(f"speaker {spk!r} has no usable utterances")
        m = make_pairs(strategy, ok_control, ok_targets, cfg["seed"])
        m.target_speaker = spk
        manifests.append(m)
    schedule = _schedule(cfg)
    _info("train_sbg_start", speakers=speakers, pairs=sum(len(m.pairs) for m in manifests))
    model, report = train_sbg(control_bases, target_bases, manifests, cfg["lambda"], schedule,
                              non_saturating=cfg["sbg"]["loss"] == "non_saturating")
    model.meta.update(seed=cfg["seed"], pairing=strategy)
    path = Path(cfg["sbg"]["checkpoint"])
    path.parent.mkdir(parents=True, exist_ok=True)
    model.save(path)
    report.save(path.with_suffix(".report.tsv"))
    _emit({"command": "train-sbg", "speakers": speakers, "pairing": strategy,
           "pairs": sum(len(m.pairs) for m in manifests), "errors": errors,
           "final_sid_acc": float(report.sid_acc[-1]) if len(report) else None,
           "output": str(path)})
    return EXIT_PARTIAL if errors else EXIT_OK


def _tag_filename(tag: str) -> str:
    return tag.replace("+", "_") + ".dafa"


def _augment_gan(tag, cfg, control, speakers, profiles, mel_cfg, wsola_cfg, lam, sbg_model):
    """Records for TG, SG, SBG and SBG+SG: one per control utterance per target speaker."""
    records, prov, errors = {}, [], []
    for spk in speakers:
        alpha = profiles[spk].sd_factor if spk in profiles else None
        outs = []  # (record id, source id, values, stages)
        for u in control:
            rid = f"{tag}-{spk}-{u.utt_id}"
            try:
                wave = read_wav(u.audio_path)
                stages = []
                if tag in ("TG", "SG", "SBG+SG"):
                    if alpha is None:
                        raise ConfigError(f"no speaker-dependent factor for {spk!r}")
                    mode = "tempo" if tag == "TG" else "speed"
                    factor = _sd_factor(mode, alpha)
                    wave = _perturb_wave(wave, mode, factor, wsola_cfg)
                    stages.append({"stage": f"{mode}_perturb", "alpha": factor})
                values = mel_fbank(wave, mel_cfg).values
                if tag in ("SBG", "SBG+SG"):
                    values = sbg_generate(sbg_model, values, spk, lam).values
                    stages.append({"stage": "sbg", "lambda": float(lam), "speaker": spk})
            except ConfigError:
                raise
            except ITEM_ERRORS as exc:
                errors.append({"id": rid, "error": str(exc)})
                _error("augment_failed", tag=tag, id=rid, error=str(exc))
                continue
            outs.append((rid, u.utt_id, values, stages))
        if tag in ("TG", "SG", "SBG+SG") and outs:
            model = _load_dcgan(cfg, spk)
            in_stats = compute_speaker_stats([v for _, _, v, _ in outs])
            gen = [dcgan_generate(model, normalize_with(v, in_stats)).values for _, _, v, _ in outs]
            out_stats = compute_speaker_stats(gen)
            outs = [(rid, src, normalize_with(g, out_stats),
                     st + [{"stage": "dcgan", "speaker": spk}])
                    for (rid, src, _, st), g in zip(outs, gen)]
        for rid, src, values, stages in outs:
            records[rid] = np.asarray(values, dtype=np.float32)
            prov.append({"id": rid, "source": src, "tag": tag, "stages": stages})
    return records, prov, errors


def cmd_augment(cfg) -> int:
    require(cfg, "manifest", "output")
    utts = read_manifest(cfg["manifest"])
    control, targets = _split(utts)
    tags = list(cfg["tags"])
    profiles = load_profiles(cfg["profiles"]) if cfg["profiles"] else {}
    if control and any(t != "SBG" for t in tags) and not profiles:
        raise ConfigError("profiles are required to perturb control speech per target speaker")
    speakers = _target_speakers(cfg, targets, profiles)
    mel_cfg, wsola_cfg = _mel(cfg), _wsola(cfg)
    lam = float(cfg["lambda"])

    # check every checkpoint before doing any work
    sbg_model = None
    if any(t in ("SBG", "SBG+SG") for t in tags):
        sbg_model = _load_sbg(cfg)
        for spk in speakers:
            sbg_model.speaker_index(spk)
    if any(t in ("TG", "SG", "SBG+SG") for t in tags):
        for spk in speakers:
            _load_dcgan(cfg, spk)

    out_dir = Path(cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"command": "augment", "tags": {}, "output": str(out_dir)}
    failed = False
    for tag in tags:
        if tag in ("T", "S"):
            mode = "tempo" if tag == "T" else "speed"
            pool = [u for spk in speakers for u in targets.get(spk, [])]
            items = [(u, f, rid, None) for u, f, rid in _si_items(pool, cfg["si_factors"], mode)]
            items += _sd_items(control, speakers, profiles, mode)
            expected = len(cfg["si_factors"]) * len(pool) + len(control) * len(speakers)
            records, prov, errors = _run_perturbations(items, mode, mel_cfg, wsola_cfg, tag)
            for p in prov:
                p["tag"] = tag
        else:
            expected = len(control) * len(speakers)
            records, prov, errors = _augment_gan(tag, cfg, control, speakers, profiles,
                                                 mel_cfg, wsola_cfg, lam, sbg_model)
        if len(records) + len(errors) != expected or len(prov) != len(records):
            raise CountMismatch(f"{tag}: expected {expected} records, wrote {len(records)} "
                                f"with {len(errors)} failures")
        path = out_dir / _tag_filename(tag)
        _write_archive(path, records, prov)
        entry = {"archive": str(path), "expected": expected, "written": len(records),
                 "failed": len(errors), "errors": errors}
        if tag in ("SBG", "SBG+SG") and lam == 0.0:
            entry["degenerate"] = "lambda is 0: spectral-basis stage is the identity"
        report["tags"][tag] = entry
        failed = failed or bool(errors)
        _info("augment_tag_done", tag=tag, written=len(records), expected=expected)
    (out_dir / "augment_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                                 encoding="utf-8")
    _emit(report)
    return EXIT_PARTIAL if failed else EXIT_OK


def spectrogram_deviation(before, after) -> float:
    """``||S' - S||_F / ||S||_F``."""
    before = np.asarray(before, dtype=np.float64)
    return float(np.linalg.norm(np.asarray(after, dtype=np.float64) - before) / np.linalg.norm(before))


def cmd_sweep_lambda(cfg) -> int:
    require(cfg, "manifest", "output")
    model = _load_sbg(cfg)
    control, targets = _split(read_manifest(cfg["manifest"]))
    if not control:
        raise ConfigError("the sweep perturbs control utterances; the manifest has none")
    speakers = cfg["target_speakers"] or list(model.speakers)
    for spk in speakers:
        model.speaker_index(spk)
    mel_cfg = _mel(cfg)
    cache = archive_read(cfg["features"]) if cfg["features"] else None
    sources, errors = {}, []
    for u in control:
        try:
            sources[u.utt_id] = _features(u, mel_cfg, cache)
        except (KeyError, *ITEM_ERRORS) as exc:
            errors.append({"id": u.utt_id, "error": str(exc)})
            _error("sweep_source_failed", id=u.utt_id, error=str(exc))
    out_dir = Path(cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    table = []
    for lam in cfg["sweep"]["grid"]:
        records, devs = {}, []
        for spk in speakers:
            for uid, values in sources.items():
                out = sbg_generate(model, values, spk, float(lam)).values
                records[f"SBG-{spk}-{uid}"] = out.astype(np.float32)
                devs.append(spectrogram_deviation(values, out))
        path = out_dir / f"lambda_{float(lam):g}.dafa"
        _write_archive(path, records)
        mean_dev = float(np.mean(devs)) if devs else float("nan")
        table.append({"lambda": float(lam), "deviation": mean_dev, "records": len(records),
                      "archive": str(path)})
        _info("sweep_point", **{"lambda": float(lam), "deviation": mean_dev})
    with open(out_dir / "sweep_table.tsv", "w", encoding="utf-8") as fh:
        fh.write("lambda\tmean_relative_deviation\n")
        for row in table:
            fh.write(f"{row['lambda']:g}\t{row['deviation']:.10g}\n")
    _emit({"command": "sweep-lambda", "table": table, "errors": errors})
    return EXIT_PARTIAL if errors else EXIT_OK


def _inspect_payload(path: Path, list_ids: bool):
    data = path.read_bytes()
    if data[:4] == b"DAFA":
        feats = archive_parse(data)
        shapes = [m.shape for m in feats.values()]
        info = {"kind": "feature_archive", "records": len(feats),
                "n_mels": sorted({s[0] for s in shapes}),
                "total_frames": int(sum(s[1] for s in shapes)),
                "min_frames": min((s[1] for s in shapes), default=0),
                "max_frames": max((s[1] for s in shapes), default=0),
                "provenance": provenance_path(path).is_file()}
        if info["provenance"]:
            info["provenance_records"] = len(read_provenance(path))
        if list_ids:
            info["ids"] = list(feats)
        return info
    if data[:4] == b"DGPT":
        groups, meta = parse_checkpoint(data)
        return {"kind": "checkpoint", "meta": meta,
                "groups": {name: {"layers": len(net.layers), "params": net.n_params()}
                           for name, net in groups.items()}}
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptArchive(f"{path}: not a feature archive, checkpoint or profile file") from None
    if isinstance(doc, dict) and "speakers" in doc:
        return {"kind": "speaker_profiles",
                "control_mean_phone_duration": doc.get("control_mean_phone_duration"),
                "factors": {s: r["sd_factor"] for s, r in doc["speakers"].items()}}
    raise CorruptArchive(f"{path}: unrecognised JSON document")


def cmd_inspect(paths, list_ids=False) -> int:
    status = EXIT_OK
    for p in paths:
        path = Path(p)
        try:
            info = _inspect_payload(path, list_ids)
        except (OSError, DysaugError) as exc:
            _error("inspect_failed", path=str(path), error=str(exc))
            _emit({"command": "inspect", "path": str(path), "ok": False, "error": str(exc)})
            status = EXIT_PARTIAL
            continue
        _emit(dict(info, command="inspect", path=str(path), ok=True))
    return status


COMMANDS = {
    "extract": (cmd_extract, "log-Mel features for every manifest utterance"),
    "estimate-factors": (cmd_estimate_factors, "per-speaker tempo factors from phone alignments"),
    "perturb": (cmd_perturb, "speed/tempo perturbed features (SI factor set or SD factors)"),
    "pair": (cmd_pair, "pair control and target utterances for GAN training"),
    "train-dcgan": (cmd_train_dcgan, "train one convolutional GAN per target speaker"),
    "train-sbg": (cmd_train_sbg, "train the spectral-basis GAN"),
    "augment": (cmd_augment, "write augmented feature archives for the configured tags"),
    "sweep-lambda": (cmd_sweep_lambda, "spectral-basis perturbation over a grid of scales"),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dysaug", allow_abbrev=False, description=__doc__.split("\n")[0],
        epilog="Any config field can be overridden with --field=value (dotted for nested "
               "fields, e.g. --schedule.max_iters=50). DYSAUG_SEED overrides the seed.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, allow_abbrev=False)
        p.add_argument("--config", help="YAML pipeline configuration")
    p = sub.add_parser("inspect", help="summarise archives, checkpoints or profile files",
                       allow_abbrev=False)
    p.add_argument("paths", nargs="+")
    p.add_argument("--ids", action="store_true", help="list record ids of archives")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    _setup_logging(args.verbose)
    if args.verb == "inspect":
        if extra:
            parser.error(f"unexpected arguments {extra}")
        return cmd_inspect(args.paths, args.ids)
    func = COMMANDS[args.verb][0]
    try:
        cfg = load_config(args.config, extra)
        return func(cfg)
    except (ConfigError, ManifestError, MissingCheckpoint, UnknownSpeakerInPairing) as exc:
        _error("invalid_configuration", verb=args.verb, error=str(exc))
        return EXIT_CONFIG
    except MissingAlignments as exc:
        _error("missing_alignments", speakers=exc.speakers)
        _emit({"command": args.verb, "missing": exc.speakers})
        return EXIT_PARTIAL
    except (CountMismatch, DysaugError, OSError, ValueError) as exc:
        _error("command_failed", verb=args.verb, error=str(exc), type=type(exc).__name__)
        return EXIT_PARTIAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
