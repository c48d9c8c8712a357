"""Deterministic tile-parallel rendering of dynamical planes by escape class."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .catalog import UnknownMap, get_map
from .escape import (K_NONESC, K_OSC, K_PERIODIC, K_POINT, K_UNDECIDED, K_WANDER, OverlappingCover,
                     build_cover, classify_escape, classify_many, decision_to_class)
from .orbits import OMEGA_TAIL
from .sphere import INF, as_point, point_from_json, point_to_json

__all__ = ["RenderConfig", "InvalidConfig", "ClassImage", "render_plane", "probe_point",
           "encode_image", "ppm_bytes", "pixel_centers", "DEFAULT_PALETTE", "class_code"]

# class codes in the image grid; escaping to cover target k gets TO_POINT + k
CODE_UNDECIDED, CODE_NONESC, CODE_PERIODIC, CODE_OSC, CODE_WANDER, CODE_TO_POINT = 0, 1, 2, 3, 4, 10

DEFAULT_PALETTE = {
    "undecided": [128, 128, 128],
    "non_escaping": [0, 0, 0],
    "periodic": [200, 40, 200],
    "oscillating": [230, 60, 40],
    "wandering": [250, 220, 0],
    "to_point": [[40, 160, 60], [40, 90, 220], [0, 200, 200], [240, 140, 20]],
}
PACKET_PIXELS = 4096
_CLASS_KEYS = ("undecided", "non_escaping", "periodic", "oscillating", "wandering")


class InvalidConfig(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _rgb_ok(c):
    return isinstance(c, (list, tuple)) and len(c) == 3 and all(
        isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= 255 for v in c)


@dataclass
class RenderConfig:
    map: str = "g"
    params: Dict[str, float] = field(default_factory=dict)
    window: Tuple[float, float, float, float] = (-0.5, 0.5, -0.3, 0.3)
    width: int = 400
    height: int = 300
    budget: int = 500
    cover: Dict[str, object] = field(default_factory=lambda: {"targets": [[0.0, 0.0], "inf"],
                                                              "radius": 0.15})
    palette: Dict[str, object] = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_PALETTE)))
    tile: int = 64
    output: str = "render.ppm"
    seed: int = 0

    def __post_init__(self):
        self.window = tuple(float(v) for v in self.window)
        self.validate()

    def validate(self):
        bad = []
        if not isinstance(self.width, int) or self.width < 1:
            bad.append("width: must be an integer >= 1")
        if not isinstance(self.height, int) or self.height < 1:
            bad.append("height: must be an integer >= 1")
        if len(self.window) != 4:
            bad.append("window: needs re_min, re_max, im_min, im_max")
        else:
            a, b, c, d = self.window
            if not (np.isfinite(self.window).all() and a < b and c < d):
                bad.append("window: must be finite with re_min < re_max and im_min < im_max")
        if not isinstance(self.budget, int) or self.budget < 1:
            bad.append("budget: must be an integer >= 1")
        if not isinstance(self.tile, int) or self.tile < 1:
            bad.append("tile: must be an integer >= 1")
        try:
            get_map(self.map, **self.params)
        except (UnknownMap, TypeError, ValueError) as err:
            bad.append(f"map: {err}")
        try:
            self.build_cover()
        except (OverlappingCover, ValueError, TypeError, KeyError) as err:
            bad.append(f"cover: {err}")
        pal = self.palette if isinstance(self.palette, dict) else {}
        for key in _CLASS_KEYS:
            if not _rgb_ok(pal.get(key)):
                bad.append(f"palette.{key}: needs an [r, g, b] colour")
        tp = pal.get("to_point")
        if not (isinstance(tp, list) and tp and all(_rgb_ok(c) for c in tp)):
            bad.append("palette.to_point: needs a non-empty list of [r, g, b] colours")
        if bad:
            raise InvalidConfig(bad)

    def build_cover(self):
        targets = [point_from_json(t) for t in self.cover["targets"]]
        return build_cover(targets, float(self.cover.get("radius", 0.15)))

    def fmap(self):
        return get_map(self.map, **self.params)

    def checkpoints(self):
        """Budgets at which pixels may stop early (the last one is ``budget``)."""
        b = self.budget
        return tuple(sorted({max(1, b // d) for d in (25, 10, 5, 2, 1)}))

    def tail(self):
        return max(1, min(OMEGA_TAIL, self.budget // 5))

    def to_json(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, obj) -> "RenderConfig":
        if not isinstance(obj, dict):
            raise InvalidConfig(["config: must be a JSON object"])
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(obj) - known)
        if extra:
            raise InvalidConfig([f"{k}: unknown field" for k in extra])
        try:
            return cls(**obj)
        except TypeError as err:
            raise InvalidConfig([str(err)]) from None

    @classmethod
    def loads(cls, text: str) -> "RenderConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as err:
            raise InvalidConfig([f"config: not valid JSON ({err})"]) from None
        return cls.from_json(obj)

    @classmethod
    def load(cls, path) -> "RenderConfig":
        with open(path) as fh:
            return cls.loads(fh.read())


@dataclass
class ClassImage:
    codes: np.ndarray  # (height, width) int16 class codes
    rgb: np.ndarray  # (height, width, 3) uint8

    @property
    def width(self):
        return self.codes.shape[1]

    @property
    def height(self):
        return self.codes.shape[0]


def pixel_centers(config: RenderConfig, rows, cols):
    """Pixel-centre points; row 0 is the top edge (im_max)."""
    a, b, c, d = config.window
    x = a + (np.asarray(cols) + 0.5) * ((b - a) / config.width)
    y = d - (np.asarray(rows) + 0.5) * ((d - c) / config.height)
    return x[None, :] + 1j * y[:, None]


def class_code(kind, target):
    table = {K_UNDECIDED: CODE_UNDECIDED, K_NONESC: CODE_NONESC, K_PERIODIC: CODE_PERIODIC,
             K_OSC: CODE_OSC, K_WANDER: CODE_WANDER}
    kind = np.asarray(kind)
    out = np.zeros(kind.shape, dtype=np.int16)
    for k, v in table.items():
        out[kind == k] = v
    pt = kind == K_POINT
    out[pt] = CODE_TO_POINT + np.asarray(target)[pt]
    return out


def _paint(config, codes):
    pal = config.palette
    lut = np.zeros((CODE_TO_POINT + 64, 3), dtype=np.uint8)
    for code, key in zip((CODE_UNDECIDED, CODE_NONESC, CODE_PERIODIC, CODE_OSC, CODE_WANDER), _CLASS_KEYS):
        lut[code] = pal[key]
    tp = pal["to_point"]
    for k in range(64):
        lut[CODE_TO_POINT + k] = tp[k % len(tp)]
    return lut[codes]


def _render_packet(config, fmap, cover, tiles):
    """Classify the pixels of several tiles in one vectorized batch."""
    blocks = [pixel_centers(config, np.arange(r0, r1), np.arange(c0, c1)) for r0, r1, c0, c1 in tiles]
    z = np.concatenate([b.ravel() for b in blocks])
    res = classify_many(fmap, z, cover, config.checkpoints(), tail=config.tail())
    codes = class_code(res.decision.kind, res.decision.target)
    out, k = [], 0
    for b in blocks:
        out.append(codes[k:k + b.size].reshape(b.shape))
        k += b.size
    return out


def _packets(tiles, min_pixels=PACKET_PIXELS):
    """Group consecutive tiles so each batch holds at least ``min_pixels`` pixels."""
    group, size = [], 0
    for t in tiles:
        group.append(t)
        size += (t[1] - t[0]) * (t[3] - t[2])
        if size >= min_pixels:
            yield group
            group, size = [], 0
    if group:
        yield group


def _workers(requested=None):
    env = os.environ.get("ESSDYN_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    n = cap if requested is None else min(int(requested), cap)
    return max(1, n)


def render_plane(config: RenderConfig, workers: Optional[int] = None) -> ClassImage:
    """Classify every pixel centre; tiles are independent and merged by position."""
    config.validate()
    fmap = config.fmap()
    cover = config.build_cover()
    H, W, T = config.height, config.width, config.tile
    codes = np.zeros((H, W), dtype=np.int16)
    tiles = [(r, min(r + T, H), c, min(c + T, W)) for r in range(0, H, T) for c in range(0, W, T)]
    packets = list(_packets(tiles))
    n = _workers(workers)
    if n == 1:
        results = [_render_packet(config, fmap, cover, p) for p in packets]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(lambda p: _render_packet(config, fmap, cover, p), packets))
    # results come back in submission order, so the merge is positional
    for group, blocks in zip(packets, results):
        for (r0, r1, c0, c1), block in zip(group, blocks):
            codes[r0:r1, c0:c1] = block
    return ClassImage(codes, _paint(config, codes))


def probe_point(config: RenderConfig, z):
    """Escape class of a single point with the settings used for pixels."""
    return classify_escape(config.fmap(), z, config.build_cover(), config.checkpoints(),
                           tail=config.tail())


def ppm_bytes(image: ClassImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(image.rgb, dtype=np.uint8).tobytes()


def encode_image(image: ClassImage, path, png_path=None) -> bool:
    """Write the PPM; also a PNG when ``png_path`` is given and Pillow is installed.

    Returns whether the PNG was written.
    """
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(image))
    if png_path is None:
        return False
    try:
        from PIL import Image
    except ImportError:
        return False
    Image.fromarray(image.rgb, "RGB").save(png_path)
    return True
