"""HTTP service hosting the clinician Likert review workflow.

Serves case listings, windowed CT slice renderings with organ-contour
overlays (PNG), score submission, and live Likert summaries. Volumes are
cached read-only; the JSON-lines scores file is the single mutable resource
and appends to it are serialized.

Endpoints (JSON unless noted):
    GET  /api/cases
    GET  /api/cases/{id}/meta
    GET  /api/cases/{id}/organs
    GET  /api/cases/{id}/slices/{axis}/{index}?window=&level=&overlays=&mode=  -> PNG
    POST /api/cases/{id}/scores   {rater_id, organ, score, comment?}
    GET  /api/summary/likert
Static frontend assets are served at /.
"""

from __future__ import annotations

import io
import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from .manifest import Manifest
from .nifti import read_image_volume, read_label_volume
from .report import (LikertRecord, append_likert_record, likert_summarize,
                     load_likert_records)
from .schema import OrganSchema
from .volume import ImageVolume, LabelVolume

DEFAULT_WINDOW = 400.0   # abdominal soft-tissue window (HU)
DEFAULT_LEVEL = 40.0

# fixed per-organ contour palette (hex RGB)
ORGAN_PALETTE = {
    "spleen": "#e6194b",
    "kidney_left": "#3cb44b",
    "kidney_right": "#4363d8",
    "heart": "#f58231",
    "pancreas": "#911eb4",
    "liver": "#46f0f0",
    "stomach_bowel": "#f032e6",
    "lung_left": "#bcf60c",
    "lung_right": "#fabebe",
    "vertebrae": "#008080",
    "spinal_canal": "#e6beff",
    "aorta_abdominal": "#9a6324",
    "inferior_vena_cava": "#fffac8",
    "autochthon_left": "#800000",
    "autochthon_right": "#aaffc3",
    "iliopsoas_left": "#808000",
    "iliopsoas_right": "#ffd8b1",
}
_FALLBACK_COLOR = "#cccccc"


def organ_color(name: str) -> str:
    return ORGAN_PALETTE.get(name, _FALLBACK_COLOR)


def _hex_to_rgb(color: str) -> tuple[int, int, int]:
    color = color.lstrip("#")
    return tuple(int(color[i:i + 2], 16) for i in (0, 2, 4))


def window_to_uint8(slice_hu: np.ndarray, window: float, level: float) -> np.ndarray:
    """Map HU values to 0..255 through a window/level ramp."""
    if window <= 0:
        window = 1.0
    lo = level - window / 2.0
    scaled = (slice_hu.astype(np.float64) - lo) / window
    return (np.clip(scaled, 0.0, 1.0) * 255.0).astype(np.uint8)


def contour_2d(mask: np.ndarray) -> np.ndarray:
    """In-plane boundary pixels of a 2D mask (4-neighborhood)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros_like(mask)
    interior = mask.copy()
    for axis in range(2):
        lo = np.zeros_like(mask)
        hi = np.zeros_like(mask)
        src = [slice(None)] * 2
        dst = [slice(None)] * 2
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
        lo[tuple(dst)] = mask[tuple(src)]
        hi[tuple(src)] = mask[tuple(dst)]
        interior &= lo & hi
    return mask & ~interior


def _take_slice(voxels: np.ndarray, axis: int, index: int) -> np.ndarray:
    cut = [slice(None)] * 3
    cut[axis] = index
    return voxels[tuple(cut)]


def render_slice(image: ImageVolume, labels: LabelVolume | None, axis: int,
                 index: int, window: float = DEFAULT_WINDOW,
                 level: float = DEFAULT_LEVEL, overlays=(),
                 mode: str = "composite",
                 schema: OrganSchema | None = None) -> bytes:
    """Render one slice as PNG.

    mode "composite" burns the organ contours into the windowed CT (RGB),
    "overlay" returns only the contours on a transparent background (RGBA),
    "base" returns the windowed CT alone (grayscale).
    """
    base = window_to_uint8(_take_slice(image.voxels, axis, index), window, level)
    if mode == "base":
        out = Image.fromarray(base, mode="L")
    elif mode in ("composite", "overlay"):
        contours = {}
        if labels is not None and schema is not None:
            label_slice = _take_slice(labels.voxels, axis, index)
            for name in overlays:
                code = schema.code_of(name)
                edge = contour_2d(label_slice == code)
                if edge.any():
                    contours[name] = edge
        if mode == "composite":
            rgb = np.stack([base] * 3, axis=-1)
            for name, edge in contours.items():
                rgb[edge] = _hex_to_rgb(organ_color(name))
            out = Image.fromarray(rgb, mode="RGB")
        else:
            rgba = np.zeros((*base.shape, 4), dtype=np.uint8)
            for name, edge in contours.items():
                r, g, b = _hex_to_rgb(organ_color(name))
                rgba[edge] = (r, g, b, 255)
            out = Image.fromarray(rgba, mode="RGBA")
    else:
        raise ValueError(f"mode must be composite/overlay/base, got {mode!r}")
    buf = io.BytesIO()
    out.save(buf, format="PNG")
    return buf.getvalue()


_AXIS_NAMES = {"axial": ("S", "I"), "coronal": ("A", "P"), "sagittal": ("R", "L")}


def resolve_axis(grid_codes, token: str) -> int:
    """Map an axis token (0/1/2 or axial/coronal/sagittal) to a voxel axis."""
    if token.isdigit():
        axis = int(token)
        if axis not in (0, 1, 2):
            raise KeyError(token)
        return axis
    try:
        wanted = _AXIS_NAMES[token.lower()]
    except KeyError:
        raise KeyError(token) from None
    for i, code in enumerate(grid_codes):
        if code in wanted:
            return i
    raise KeyError(token)


class ReviewService:
    """Shared state behind the HTTP handlers: volumes, schema, scores file."""

    def __init__(self, manifest: Manifest, schema: OrganSchema, labels_dir,
                 scores_path, base_dir=".", frontend_dir=None,
                 window: float = DEFAULT_WINDOW, level: float = DEFAULT_LEVEL):
        self.manifest = manifest
        self.schema = schema
        self.labels_dir = Path(labels_dir)
        self.scores_path = Path(scores_path)
        self.base_dir = Path(base_dir)
        self.frontend_dir = Path(frontend_dir) if frontend_dir else None
        self.window = window
        self.level = level
        self._cache: dict[str, tuple[ImageVolume, LabelVolume]] = {}
        self._cache_lock = threading.Lock()
        self._scores_lock = threading.Lock()
        self.scores_path.parent.mkdir(parents=True, exist_ok=True)
        self.scores_path.touch(exist_ok=True)

    # -- volumes ------------------------------------------------------------

    def _labels_path(self, case_id: str) -> Path:
        for suffix in (".nii.gz", ".nii"):
            p = self.labels_dir / f"{case_id}{suffix}"
            if p.exists():
                return p
        raise FileNotFoundError(f"no label volume for case {case_id!r} "
                                f"in {self.labels_dir}")

    def volumes(self, case_id: str) -> tuple[ImageVolume, LabelVolume]:
        with self._cache_lock:
            if case_id in self._cache:
                return self._cache[case_id]
        case = self.manifest.case(case_id)  # KeyError -> 404
        image_path = Path(case.image_path)
        if not image_path.is_absolute():
            image_path = self.base_dir / image_path
        image = read_image_volume(image_path)
        labels = read_label_volume(self._labels_path(case_id))
        with self._cache_lock:
            self._cache.setdefault(case_id, (image, labels))
            return self._cache[case_id]

    def organs_present(self, case_id: str) -> list[dict]:
        _, labels = self.volumes(case_id)
        counts = np.bincount(labels.voxels.ravel(),
                             minlength=max(self.schema.codes()) + 1)
        out = []
        for organ in self.schema:
            n = int(counts[organ.label_code]) if organ.label_code < len(counts) else 0
            out.append({
                "name": organ.name,
                "label_code": organ.label_code,
                "organ_type": organ.organ_type,
                "color": organ_color(organ.name),
                "present": n > 0,
                "voxel_count": n,
            })
        return out

    # -- scores -------------------------------------------------------------

    def validate_score(self, case_id: str, body: dict) -> LikertRecord | str:
        """Returns a LikertRecord, or an error message when invalid."""
        rater = body.get("rater_id")
        organ = body.get("organ")
        score = body.get("score")
        comment = body.get("comment", "")
        if not isinstance(rater, str) or not rater.strip():
            return "rater_id must be a non-empty string"
        if not isinstance(organ, str) or organ not in self.schema.names():
            return f"unknown organ {organ!r}"
        if isinstance(score, bool) or not isinstance(score, int):
            return f"score must be an integer 1..5, got {score!r}"
        if not 1 <= score <= 5:
            return f"score {score} outside 1..5"
        present = {o["name"] for o in self.organs_present(case_id) if o["present"]}
        if organ not in present:
            return f"organ {organ!r} is absent in case {case_id!r} and not scorable"
        if not isinstance(comment, str):
            return "comment must be a string"
        return LikertRecord(case_id=case_id, organ=organ,
                            rater_id=rater.strip(), score=score, comment=comment)

    def submit_score(self, record: LikertRecord) -> None:
        with self._scores_lock:
            append_likert_record(record, self.scores_path)

    def scored_by_case(self) -> dict[str, dict[str, list[str]]]:
        """case_id -> rater_id -> sorted list of scored organs."""
        out: dict[str, dict[str, set]] = {}
        for rec in load_likert_records(self.scores_path):
            out.setdefault(rec.case_id, {}).setdefault(rec.rater_id, set()).add(rec.organ)
        return {c: {r: sorted(s) for r, s in raters.items()}
                for c, raters in out.items()}

    def likert_summary(self) -> list[dict]:
        records = load_likert_records(self.scores_path)
        return [s.to_dict() for s in likert_summarize(records)]


class _ReviewHandler(BaseHTTPRequestHandler):
    service: ReviewService = None  # set on the subclass by make_server

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, payload: bytes, content_type: str):
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _json(self, code: int, doc) -> None:
        self._send(code, json.dumps(doc).encode("utf-8"), "application/json")

    def _error(self, code: int, message: str) -> None:
        self._json(code, {"error": message})

    # -- routing ------------------------------------------------------------

    def do_GET(self):
        try:
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            query = {k: v[-1] for k, v in parse_qs(url.query).items()}
            if parts[:2] == ["api", "cases"] and len(parts) == 2:
                return self._list_cases()
            if parts[:2] == ["api", "cases"] and len(parts) == 4 and parts[3] == "meta":
                return self._case_meta(parts[2])
            if parts[:2] == ["api", "cases"] and len(parts) == 4 and parts[3] == "organs":
                return self._case_organs(parts[2])
            if (parts[:2] == ["api", "cases"] and len(parts) == 6
                    and parts[3] == "slices"):
                return self._slice(parts[2], parts[4], parts[5], query)
            if parts == ["api", "summary", "likert"]:
                return self._json(200, {"organs": self.service.likert_summary()})
            if not parts or not parts[0] == "api":
                return self._static(url.path)
            return self._error(404, f"unknown endpoint {url.path}")
        except BrokenPipeError:
            pass
        except Exception as exc:  # noqa: BLE001 - service must not die
            self._error(500, f"{type(exc).__name__}: {exc}")

    def do_POST(self):
        try:
            parts = [p for p in urlparse(self.path).path.split("/") if p]
            if (parts[:2] == ["api", "cases"] and len(parts) == 4
                    and parts[3] == "scores"):
                return self._post_score(parts[2])
            return self._error(404, f"unknown endpoint {self.path}")
        except BrokenPipeError:
            pass
        except Exception as exc:  # noqa: BLE001
            self._error(500, f"{type(exc).__name__}: {exc}")

    # -- endpoints ----------------------------------------------------------

    def _list_cases(self):
        scored = self.service.scored_by_case()
        cases = []
        for case in self.service.manifest:
            organs = self.service.organs_present(case.case_id)
            cases.append({
                "case_id": case.case_id,
                "patient_id": case.patient_id,
                "dataset": case.dataset,
                "age_years": case.age_years,
                "sex": case.sex,
                "n_organs_present": sum(1 for o in organs if o["present"]),
                "scored_organs": scored.get(case.case_id, {}),
            })
        self._json(200, {"cases": cases})

    def _case(self, case_id: str):
        try:
            return self.service.manifest.case(case_id)
        except KeyError:
            return None

    def _case_meta(self, case_id: str):
        case = self._case(case_id)
        if case is None:
            return self._error(404, f"unknown case {case_id!r}")
        image, _ = self.service.volumes(case_id)
        grid = image.grid
        self._json(200, {
            "case_id": case.case_id,
            "patient_id": case.patient_id,
            "dataset": case.dataset,
            "age_years": case.age_years,
            "sex": case.sex,
            "tumor_type": case.tumor_type,
            "iv_contrast": case.iv_contrast,
            "nephrectomy_side": case.nephrectomy_side,
            "dims": list(grid.dims),
            "spacing": list(grid.spacing),
            "origin": list(grid.origin),
            "axis_codes": list(grid.axis_codes),
            "axial_axis": grid.axial_axis(),
            "window_default": self.service.window,
            "level_default": self.service.level,
        })

    def _case_organs(self, case_id: str):
        if self._case(case_id) is None:
            return self._error(404, f"unknown case {case_id!r}")
        self._json(200, {"organs": self.service.organs_present(case_id)})

    def _slice(self, case_id: str, axis_token: str, index_token: str, query):
        case = self._case(case_id)
        if case is None:
            return self._error(404, f"unknown case {case_id!r}")
        image, labels = self.service.volumes(case_id)
        try:
            axis = resolve_axis(image.grid.axis_codes, axis_token)
        except KeyError:
            return self._error(404, f"unknown axis {axis_token!r}")
        try:
            index = int(index_token)
        except ValueError:
            return self._error(404, f"bad slice index {index_token!r}")
        if not 0 <= index < image.dims[axis]:
            return self._error(404, f"slice {index} outside 0..{image.dims[axis] - 1}")
        window = float(query.get("window", self.service.window))
        level = float(query.get("level", self.service.level))
        mode = query.get("mode", "composite")
        if "overlays" in query:
            requested = [o for o in query["overlays"].split(",") if o]
            unknown = [o for o in requested if o not in self.service.schema.names()]
            if unknown:
                return self._error(400, f"unknown overlay organs {unknown}")
            overlays = requested
        else:
            overlays = self.service.schema.names()
        try:
            png = render_slice(image, labels, axis, index, window, level,
                               overlays, mode, self.service.schema)
        except ValueError as exc:
            return self._error(400, str(exc))
        self._send(200, png, "image/png")

    def _post_score(self, case_id: str):
        if self._case(case_id) is None:
            return self._error(404, f"unknown case {case_id!r}")
        length = int(self.headers.get("Content-Length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            return self._error(400, "body is not valid JSON")
        result = self.service.validate_score(case_id, body)
        if isinstance(result, str):
            return self._error(400, result)
        self.service.submit_score(result)
        self._json(200, {"status": "ok", "record": result.to_dict()})

    # -- static frontend ----------------------------------------------------

    def _static(self, path: str):
        root = self.service.frontend_dir
        if root is None or not root.is_dir():
            return self._send(200, _PLACEHOLDER_PAGE.encode("utf-8"),
                              "text/html; charset=utf-8")
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            index = root / "index.html"
            if index.is_file():  # SPA fallback
                target = index
            else:
                return self._error(404, f"no static asset {rel!r}")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)


_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>OAR review service</title></head>
<body><h1>OAR review service</h1>
<p>No frontend bundle configured. API endpoints:</p>
<ul>
<li>GET /api/cases</li>
<li>GET /api/cases/{id}/meta</li>
<li>GET /api/cases/{id}/organs</li>
<li>GET /api/cases/{id}/slices/{axis}/{index}?window=&amp;level=&amp;overlays=&amp;mode=</li>
<li>POST /api/cases/{id}/scores</li>
<li>GET /api/summary/likert</li>
</ul></body></html>
"""


def make_server(service: ReviewService, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    handler = type("BoundReviewHandler", (_ReviewHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: ReviewService, host: str = "127.0.0.1",
                  port: int = 8000) -> None:
    server = make_server(service, host, port)
    print(f"review service listening on http://{host}:{server.server_address[1]}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
