"""Declarative INI-style experiment configs.

Sections: [video] plus one [object.N] per target and optional
[distractor.N] clutter; [policy]; [scorer]; [run]. Every value is a plain
key = value string; lists use commas, coordinate pairs use `r,c`, and
multi-part entries are separated with `;`. See README for the full key
reference.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .episode import CorruptionEvent, PolicyConfig, ScorerConfig
from .errors import ConfigError, SpecError
from .synth import DistractorSpec, MoverSpec, Recolor, VideoSpec


@dataclass(frozen=True)
class RunConfig:
    video: VideoSpec
    policy: PolicyConfig
    scorer: ScorerConfig
    seeds: tuple[int, ...]
    digest: str


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from exc
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()

    video = _video(parser)
    policy = _policy(parser)
    scorer = _scorer(parser)
    seeds = _ints(_get(parser, "run", "seeds", "0"), "run", "seeds")
    return RunConfig(video=video, policy=policy, scorer=scorer,
                     seeds=tuple(seeds), digest=digest)


def _get(parser, section, key, default=None):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return default


def _typed(section: str, key: str, raw: str, conv, what: str):
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"[{section}] {key}: expected {what}, got {raw!r}") from exc


def _int(parser, section, key, default):
    raw = _get(parser, section, key)
    if raw is None:
        return default
    return _typed(section, key, raw, int, "an integer")


def _float(parser, section, key, default):
    raw = _get(parser, section, key)
    if raw is None:
        return default
    return _typed(section, key, raw, float, "a number")


def _bool(parser, section, key, default):
    raw = _get(parser, section, key)
    if raw is None:
        return default
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _ints(raw: str, section: str, key: str) -> list[int]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"[{section}] {key}: expected a nonempty int list")
    return [_typed(section, key, p, int, "an integer") for p in parts]


def _floats(raw: str, section: str, key: str, count: int | None = None):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    vals = [_typed(section, key, p, float, "a number") for p in parts]
    if count is not None and len(vals) != count:
        raise ConfigError(
            f"[{section}] {key}: expected {count} numbers, got {len(vals)}")
    return vals


def _pairs(raw: str, section: str, key: str) -> list[tuple[float, float]]:
    out = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        vals = _floats(part, section, key, count=2)
        out.append((vals[0], vals[1]))
    if not out:
        raise ConfigError(f"[{section}] {key}: expected at least one pair")
    return out


def _windows(raw: str, section: str, key: str) -> list[tuple[int, int]]:
    out = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 2:
            raise ConfigError(
                f"[{section}] {key}: expected start:end, got {part!r}")
        out.append((_typed(section, key, bits[0], int, "an integer"),
                    _typed(section, key, bits[1], int, "an integer")))
    return out


def _size(raw: str, section: str, key: str, shape: str):
    if shape == "disc":
        return _typed(section, key, raw, float, "a radius")
    vals = _floats(raw, section, key, count=2)
    return (int(vals[0]), int(vals[1]))


def _recolors(raw: str, section: str, key: str) -> tuple[Recolor, ...]:
    events = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 3:
            raise ConfigError(
                f"[{section}] {key}: expected frame:blend:r,g,b, got {part!r}")
        frame = _typed(section, key, bits[0], int, "a frame index")
        blend = _typed(section, key, bits[1], int, "a blend length")
        color = _floats(bits[2], section, key, count=3)
        events.append(Recolor(frame=frame, color=tuple(color), blend=blend))
    return tuple(events)


def _video(parser) -> VideoSpec:
    if not parser.has_section("video"):
        raise ConfigError("missing [video] section")
    sec = "video"
    objects = []
    distractors = []
    for section in parser.sections():
        if section.startswith("object."):
            objects.append((section, _mover(parser, section)))
        elif section.startswith("distractor."):
            distractors.append((section, _distractor(parser, section)))
    objects.sort(key=lambda kv: kv[0])
    distractors.sort(key=lambda kv: kv[0])
    if not objects:
        raise ConfigError("at least one [object.N] section is required")
    background = _floats(_get(parser, sec, "background", "0.4,0.4,0.4"),
                         sec, "background", count=3)
    try:
        return VideoSpec(
            frame_count=_int(parser, sec, "frames", 60),
            height=_int(parser, sec, "height", 64),
            width=_int(parser, sec, "width", 64),
            cell=_int(parser, sec, "cell", 4),
            background=tuple(background),
            background_jitter=_float(parser, sec, "background_jitter", 0.015),
            objects=tuple(o for _, o in objects),
            distractors=tuple(d for _, d in distractors),
            seed=_int(parser, sec, "seed", 0),
        )
    except SpecError as exc:
        raise ConfigError(f"[video]: {exc}") from exc


def _mover(parser, section) -> MoverSpec:
    shape = _get(parser, section, "shape", "disc")
    size_raw = _get(parser, section, "size")
    if size_raw is None:
        raise ConfigError(f"[{section}] size: required")
    color = _floats(_get(parser, section, "color", "0.8,0.2,0.2"),
                    section, "color", count=3)
    way_raw = _get(parser, section, "waypoints")
    if way_raw is None:
        raise ConfigError(f"[{section}] waypoints: required")
    occl = _get(parser, section, "occlusion")
    recolor = _get(parser, section, "recolor")
    return MoverSpec(
        shape=shape,
        size=_size(size_raw, section, "size", shape),
        color=tuple(color),
        waypoints=tuple(_pairs(way_raw, section, "waypoints")),
        occlusions=tuple(_windows(occl, section, "occlusion")) if occl else (),
        recolors=_recolors(recolor, section, "recolor") if recolor else (),
        snap=_get(parser, section, "snap", "cell"),
    )


def _distractor(parser, section) -> DistractorSpec:
    shape = _get(parser, section, "shape", "rect")
    size_raw = _get(parser, section, "size")
    pos_raw = _get(parser, section, "position")
    if size_raw is None or pos_raw is None:
        raise ConfigError(f"[{section}]: size and position are required")
    color = _floats(_get(parser, section, "color", "0.7,0.3,0.3"),
                    section, "color", count=3)
    pos = _pairs(pos_raw, section, "position")[0]
    return DistractorSpec(shape=shape,
                          size=_size(size_raw, section, "size", shape),
                          color=tuple(color), position=pos)


def _policy(parser) -> PolicyConfig:
    sec = "policy"
    base = PolicyConfig()  # single source of default values
    cap_raw = _get(parser, sec, "capacity", str(base.capacity))
    eviction = _get(parser, sec, "eviction", base.eviction)
    if cap_raw.strip().lower() in ("unlimited", "inf", "none"):
        capacity = None
        eviction = "unlimited"
    else:
        capacity = _typed(sec, "capacity", cap_raw, int, "an integer")
        if capacity < 1:
            raise ConfigError("[policy] capacity: must be >= 1")
    try:
        return PolicyConfig(
            sigma=_float(parser, sec, "sigma", base.sigma),
            capacity=capacity,
            interval=_int(parser, sec, "interval", base.interval),
            eviction=eviction,
            prior=_get(parser, sec, "prior", base.prior),
            prior_seed=_int(parser, sec, "prior_seed", base.prior_seed),
            prior_beta=_float(parser, sec, "prior_beta", base.prior_beta),
            normalize=_get(parser, sec, "normalize", base.normalize),
            similarity_scale=_float(parser, sec, "similarity_scale",
                                    base.similarity_scale),
            position_weight=_float(parser, sec, "position_weight",
                                   base.position_weight),
            l2_normalize_keys=_bool(parser, sec, "l2_normalize",
                                    base.l2_normalize_keys),
            channel_scale=_bool(parser, sec, "channel_scale",
                                base.channel_scale),
            decay=_float(parser, sec, "decay", base.decay),
            consistency_weight=_float(parser, sec, "consistency_weight",
                                      base.consistency_weight),
            protect_first=_bool(parser, sec, "protect_first",
                                base.protect_first),
            stride=_int(parser, sec, "stride", base.stride),
        )
    except SpecError as exc:
        raise ConfigError(f"[policy]: {exc}") from exc


def _scorer(parser) -> ScorerConfig:
    sec = "scorer"
    corrupt_raw = _get(parser, sec, "corrupt")
    corruptions = []
    if corrupt_raw:
        for part in corrupt_raw.split(","):
            part = part.strip()
            if not part:
                continue
            bits = part.split(":")
            if len(bits) != 2:
                raise ConfigError(
                    f"[scorer] corrupt: expected frame:severity, got {part!r}")
            frame = _typed(sec, "corrupt", bits[0], int, "a frame index")
            try:
                corruptions.append(CorruptionEvent(frame=frame,
                                                   severity=bits[1].strip()))
            except SpecError as exc:
                raise ConfigError(f"[scorer] corrupt: {exc}") from exc
    noise = _float(parser, sec, "noise", 0.0)
    if noise < 0:
        raise ConfigError("[scorer] noise: must be >= 0")
    return ScorerConfig(noise_sigma=noise,
                        seed=_int(parser, sec, "seed", 0),
                        corruptions=tuple(corruptions))
