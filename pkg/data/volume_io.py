"""
Volume I/O - MetaImage Header/Raw Pairs

Reads and writes 3D volumes and label masks as a MetaImage-style pair: a text
header (``.mhd``) plus a raw little-endian payload (``.raw``). Single-file
``.mha`` volumes with ``ElementDataFile = LOCAL`` are read as well.

Voxel order on disk is x fastest, then y, then slice, which is exactly the
frontal-slice-major layout of Tensor3 (axis 0 = x, axis 1 = y, axis 2 = slice).
Also provides the [0, 1] intensity normalization the solver expects.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from algebra.tensor import Dims, Tensor3
from errors import (
    SizeMismatchError,
    UnsupportedElementTypeError,
    VolumeFormatError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ElementType(str, Enum):
    """Supported voxel element types and their MetaImage names."""

    U8 = "u8"
    I16 = "i16"
    F32 = "f32"

    @property
    def met_name(self) -> str:
        return _MET_NAMES[self]

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(_DTYPES[self])

    @classmethod
    def from_met_name(cls, name: str) -> "ElementType":
        for kind, met in _MET_NAMES.items():
            if met == name:
                return kind
        raise UnsupportedElementTypeError(
            f"Unsupported ElementType: {name} (must be one of {sorted(_MET_NAMES.values())})"
        )


_MET_NAMES = {ElementType.U8: "MET_UCHAR", ElementType.I16: "MET_SHORT", ElementType.F32: "MET_FLOAT"}
_DTYPES = {ElementType.U8: "u1", ElementType.I16: "<i2", ElementType.F32: "<f4"}


@dataclass(frozen=True)
class VolumeMeta:
    """
    Volume metadata.

    Attributes:
        dims: (n1, n2, n3) voxel counts
        spacing: (sx, sy, sz) voxel size in millimeters
        element_type: On-disk element type
        intensity_offset: Offset of the normalization applied (0 if none)
        intensity_scale: Scale of the normalization applied (1 if none)
    """

    dims: Dims
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    element_type: ElementType = ElementType.F32
    intensity_offset: float = 0.0
    intensity_scale: float = 1.0

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise VolumeFormatError(f"Volume dims must be three values >= 1, got {self.dims}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise VolumeFormatError(f"Voxel spacing must be three positive values, got {self.spacing}")

    def with_dims(self, dims: Dims) -> "VolumeMeta":
        return VolumeMeta(dims, self.spacing, self.element_type, self.intensity_offset, self.intensity_scale)


def _fmt(value: float) -> str:
    # Shortest repr that round-trips exactly.
    return repr(float(value)).replace("inf", "Inf")


def _header_text(meta: VolumeMeta, data_file: str) -> str:
    lines = [
        "ObjectType = Image",
        "NDims = 3",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        "ElementByteOrderMSB = False",
        f"DimSize = {meta.dims[0]} {meta.dims[1]} {meta.dims[2]}",
        "ElementSpacing = " + " ".join(_fmt(s) for s in meta.spacing),
        f"ElementType = {meta.element_type.met_name}",
    ]
    if meta.intensity_offset != 0.0 or meta.intensity_scale != 1.0:
        lines.append(f"IntensityOffset = {_fmt(meta.intensity_offset)}")
        lines.append(f"IntensityScale = {_fmt(meta.intensity_scale)}")
    lines.append(f"ElementDataFile = {data_file}")
    return "\n".join(lines) + "\n"


def _encode(tensor: Tensor3, element_type: ElementType) -> bytes:
    values = tensor.to_flat()
    if not np.all(np.isfinite(values)):
        raise VolumeFormatError("Volume contains non-finite values")
    if element_type is ElementType.F32:
        return values.astype("<f4").tobytes()
    info = np.iinfo(element_type.dtype)
    rounded = np.rint(values)
    if rounded.min() < info.min or rounded.max() > info.max:
        raise VolumeFormatError(
            f"Values [{values.min()}, {values.max()}] do not fit {element_type.met_name}"
        )
    return rounded.astype(element_type.dtype).tobytes()


def raw_path_for(header_path: PathLike) -> Path:
    """Raw payload path paired with a header path."""
    return Path(header_path).with_suffix(".raw")


def write_volume(path: PathLike, tensor: Tensor3, meta: VolumeMeta) -> Path:
    """
    Write a volume as a header/raw pair.

    Args:
        path: Header path (``.mhd``); the payload goes next to it as ``.raw``
        tensor: Volume data
        meta: Metadata; its dims must match the tensor

    Returns:
        Header path written

    Raises:
        VolumeFormatError: Dims mismatch or values not representable
    """
    header_path = Path(path)
    if tuple(meta.dims) != tensor.dims:
        raise VolumeFormatError(f"Meta dims {meta.dims} differ from tensor dims {tensor.dims}")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    raw_path = raw_path_for(header_path)

    payload = _encode(tensor, meta.element_type)
    raw_path.write_bytes(payload)
    header_path.write_text(_header_text(meta, raw_path.name), encoding="utf-8")
    logger.info(f"Saved volume {header_path} ({tensor.dims}, {meta.element_type.value})")
    return header_path


def _parse_header(lines) -> Dict[str, str]:
    fields: Dict[str, str] = {}
    for line in lines:
        if not line.strip():
            continue
        if "=" not in line:
            raise VolumeFormatError(f"Malformed header line: {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
        if key.strip() == "ElementDataFile":
            break
    return fields


def _parse_floats(text: str, key: str, count: int):
    try:
        values = [float(v) for v in text.split()]
    except ValueError:
        raise VolumeFormatError(f"Malformed {key}: {text!r}") from None
    if len(values) != count:
        raise VolumeFormatError(f"{key} needs {count} values, got {text!r}")
    return values


def _read_header_and_payload(path: Path) -> Tuple[Dict[str, str], bytes]:
    blob = path.read_bytes()
    marker = b"ElementDataFile"
    pos = blob.find(marker)
    if pos < 0:
        raise VolumeFormatError(f"Header {path} has no ElementDataFile entry")
    line_end = blob.find(b"\n", pos)
    header_end = len(blob) if line_end < 0 else line_end + 1
    try:
        header_text = blob[:header_end].decode("utf-8")
    except UnicodeDecodeError:
        raise VolumeFormatError(f"Header {path} is not valid text") from None
    fields = _parse_header(header_text.splitlines())

    data_file = fields["ElementDataFile"]
    if data_file == "LOCAL":
        return fields, blob[header_end:]
    raw = path.parent / data_file
    if not raw.exists():
        raise VolumeFormatError(f"Raw payload {raw} named by {path} does not exist")
    return fields, raw.read_bytes()


def read_volume(path: PathLike) -> Tuple[Tensor3, VolumeMeta]:
    """
    Read a volume.

    Integer element types are widened losslessly.

    Args:
        path: Header path (``.mhd`` or single-file ``.mha``)

    Returns:
        (tensor, meta)

    Raises:
        VolumeFormatError: Malformed header
        SizeMismatchError: Payload size disagrees with DimSize and ElementType
        UnsupportedElementTypeError: ElementType not in u8/i16/f32
    """
    path = Path(path)
    fields, payload = _read_header_and_payload(path)

    if fields.get("NDims", "3") != "3":
        raise VolumeFormatError(f"Only NDims = 3 is supported, got {fields.get('NDims')}")
    if "DimSize" not in fields or "ElementType" not in fields:
        raise VolumeFormatError(f"Header {path} lacks DimSize or ElementType")

    dims_f = _parse_floats(fields["DimSize"], "DimSize", 3)
    if any(d < 1 or d != int(d) for d in dims_f):
        raise VolumeFormatError(f"DimSize must be positive integers, got {fields['DimSize']}")
    dims = tuple(int(d) for d in dims_f)
    spacing = tuple(_parse_floats(fields.get("ElementSpacing", "1 1 1"), "ElementSpacing", 3))
    element_type = ElementType.from_met_name(fields["ElementType"])

    big_endian = fields.get("ElementByteOrderMSB", fields.get("BinaryDataByteOrderMSB", "False"))
    dtype = element_type.dtype
    if big_endian.lower() == "true":
        dtype = dtype.newbyteorder(">")

    count = dims[0] * dims[1] * dims[2]
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise SizeMismatchError(
            f"Payload of {path} has {len(payload)} bytes, header needs {expected} "
            f"({dims} x {element_type.met_name})"
        )
    values = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    tensor = Tensor3.from_flat(values, dims)

    meta = VolumeMeta(
        dims=dims,
        spacing=spacing,
        element_type=element_type,
        intensity_offset=float(fields.get("IntensityOffset", 0.0)),
        intensity_scale=float(fields.get("IntensityScale", 1.0)),
    )
    logger.debug(f"Read volume {path} ({dims}, {element_type.value})")
    return tensor, meta


# Normalization

def normalize(x: Tensor3) -> Tuple[Tensor3, float, float]:
    """
    Affine map of x onto [0, 1] (min -> 0, max -> 1).

    A constant volume maps to zeros with offset = its value and scale = 1.

    Returns:
        (normalized tensor, offset, scale) with x = normalized * scale + offset
    """
    lo = float(x.data.min())
    hi = float(x.data.max())
    if hi == lo:
        return Tensor3.zeros(x.dims), lo, 1.0
    scale = hi - lo
    return Tensor3((x.data - lo) / scale), lo, scale


def normalize_joint(volumes) -> Tuple[list, float, float]:
    """Normalize several volumes with one shared offset and scale."""
    lo = min(float(v.data.min()) for v in volumes)
    hi = max(float(v.data.max()) for v in volumes)
    if hi == lo:
        return [Tensor3.zeros(v.dims) for v in volumes], lo, 1.0
    scale = hi - lo
    return [Tensor3((v.data - lo) / scale) for v in volumes], lo, scale


def denormalize(x: Tensor3, offset: float, scale: float) -> Tensor3:
    """Inverse of ``normalize``."""
    return Tensor3(x.data * scale + offset)


def write_label(path: PathLike, label, spacing: Optional[Tuple[float, float, float]] = None) -> Path:
    """Write a LabelVolume (or boolean array) as a u8 volume."""
    mask = np.asarray(getattr(label, "mask", label), dtype=bool)
    spacing = spacing or getattr(label, "spacing", (1.0, 1.0, 1.0))
    tensor = Tensor3(mask.astype(np.float64))
    return write_volume(path, tensor, VolumeMeta(tensor.dims, tuple(spacing), ElementType.U8))


def read_label(path: PathLike):
    """Read a label volume; any non-zero voxel is foreground."""
    from tools.metrics import LabelVolume

    tensor, meta = read_volume(path)
    return LabelVolume(tensor.data != 0, meta.spacing)
