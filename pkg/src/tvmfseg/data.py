"""Synthetic imbalanced segmentation data: generation, augmentation, file IO.

Each sample is a single-channel image with one randomly placed shape per
foreground class.  Shape areas shrink geometrically from class 1 to the last
class so the dataset spans a configurable largest-to-smallest area ratio,
reproducing the small-region pathology that depresses per-class Dice scores.
Pixel intensities are class-coded base levels plus Gaussian noise, clamped
to [0, 1].

Dataset files: magic "TVMFD1\n", a decimal header line
"num_samples height width num_classes", then per sample H*W float32
little-endian image values followed by H*W uint8 labels.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DataError, FormatError

DATASET_MAGIC = b"TVMFD1\n"

# Fraction of the image the largest foreground shape targets.
_MAX_AREA_FRAC = 0.12
# Uniform jitter applied to each placed shape's target area.
_AREA_JITTER = 0.2
_RING_INNER_FRAC = 0.6


@dataclass
class Sample:
    image: np.ndarray  # (H, W) float64 in [0, 1]
    label: np.ndarray  # (H, W) int64 class indices


@dataclass
class DatasetSpec:
    num_samples: int
    height: int = 64
    width: int = 64
    num_classes: int = 4
    imbalance_ratio: float = 16.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 0:
            raise ConfigurationError(f"num_samples must be >= 0, got {self.num_samples}")
        if self.height < 1 or self.width < 1:
            raise ConfigurationError(f"image size must be positive, got {self.height}x{self.width}")
        if self.num_classes < 3:
            raise ConfigurationError(f"need >= 3 classes (0 is background), got {self.num_classes}")
        if self.imbalance_ratio < 1.0:
            raise ConfigurationError(f"imbalance_ratio must be >= 1, got {self.imbalance_ratio}")
        if self.noise_sigma < 0.0:
            raise ConfigurationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")


def class_intensity_levels(num_classes):
    """Evenly spaced base intensity per class, background darkest."""
    return (np.arange(num_classes) + 0.5) / num_classes


def _target_areas(spec):
    """Geometrically decaying target pixel areas for classes 1..C-1."""
    foreground = spec.num_classes - 1
    largest = _MAX_AREA_FRAC * spec.height * spec.width
    if foreground == 1:
        return np.array([largest])
    decay = spec.imbalance_ratio ** (-1.0 / (foreground - 1))
    return largest * decay ** np.arange(foreground)


def _paint_shape(label, class_index, family, area, rng):
    """Rasterize one shape of roughly ``area`` pixels at a random center."""
    height, width = label.shape
    rows, cols = np.ogrid[:height, :width]
    if family == 0:  # disk
        radius = np.sqrt(area / np.pi)
        half_h = half_w = radius
    elif family == 1:  # rectangle
        aspect = rng.uniform(0.5, 2.0)
        rect_h = np.sqrt(area * aspect)
        rect_w = area / rect_h
        half_h, half_w = rect_h / 2.0, rect_w / 2.0
    elif family == 2:  # ring
        outer = np.sqrt(area / (np.pi * (1.0 - _RING_INNER_FRAC**2)))
        half_h = half_w = outer
    elif family == 3:  # plus sign, bar width = arm length / 3
        arm = np.sqrt(9.0 * area / 5.0)
        half_h = half_w = arm / 2.0
    else:  # diamond
        diag = np.sqrt(2.0 * area)
        half_h = half_w = diag / 2.0
    margin_r = int(np.ceil(half_h)) + 1
    margin_c = int(np.ceil(half_w)) + 1
    if 2 * margin_r >= height or 2 * margin_c >= width:
        raise ConfigurationError(
            f"class {class_index} shape (area {area:.0f}px) does not fit in {height}x{width}"
        )
    cy = rng.integers(margin_r, height - margin_r)
    cx = rng.integers(margin_c, width - margin_c)
    dy = rows - cy
    dx = cols - cx
    if family == 0:
        mask = dy**2 + dx**2 <= half_h**2
    elif family == 1:
        mask = (np.abs(dy) <= half_h) & (np.abs(dx) <= half_w)
    elif family == 2:
        r2 = dy**2 + dx**2
        mask = (r2 <= half_h**2) & (r2 >= (_RING_INNER_FRAC * half_h) ** 2)
    elif family == 3:
        bar = half_h / 3.0
        mask = ((np.abs(dy) <= bar) & (np.abs(dx) <= half_w)) | (
            (np.abs(dx) <= bar) & (np.abs(dy) <= half_h)
        )
    else:
        mask = np.abs(dy) + np.abs(dx) <= half_h
    label[mask] = class_index


def generate_sample(spec, index):
    """One sample, deterministic given spec.seed + index."""
    rng = np.random.default_rng(spec.seed + index)
    label = np.zeros((spec.height, spec.width), dtype=np.int64)
    areas = _target_areas(spec)
    for class_index in range(1, spec.num_classes):
        area = areas[class_index - 1] * rng.uniform(1.0 - _AREA_JITTER, 1.0 + _AREA_JITTER)
        family = (class_index - 1) % 5
        _paint_shape(label, class_index, family, area, rng)
    levels = class_intensity_levels(spec.num_classes)
    image = levels[label]
    if spec.noise_sigma > 0.0:
        image = image + rng.normal(0.0, spec.noise_sigma, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    return Sample(image=image, label=label)


def generate_dataset(spec):
    return [generate_sample(spec, i) for i in range(spec.num_samples)]


def one_hot_encode(label, num_classes):
    """Flatten a label map into a (classes, pixels) one-hot grid."""
    label = np.asarray(label)
    if not np.issubdtype(label.dtype, np.integer):
        raise DataError(f"labels must be integers, got dtype {label.dtype}")
    flat = label.reshape(-1)
    if flat.size and (flat.min() < 0 or flat.max() >= num_classes):
        raise DataError(f"labels outside [0, {num_classes}): min {flat.min()}, max {flat.max()}")
    onehot = np.zeros((num_classes, flat.size))
    onehot[flat, np.arange(flat.size)] = 1.0
    return onehot


def apply_flip(sample):
    """Mirror image and label left-right."""
    return Sample(image=sample.image[:, ::-1].copy(), label=sample.label[:, ::-1].copy())


def apply_rotation(sample, angle_degrees):
    """Rotate about the center: bilinear on the image, nearest on the label.

    Pixels rotated in from outside the frame become background (class 0,
    intensity 0).  A zero angle is an exact identity.
    """
    if angle_degrees == 0.0:
        return Sample(image=sample.image.copy(), label=sample.label.copy())
    image = ndimage.rotate(
        sample.image, angle_degrees, reshape=False, order=1, mode="constant", cval=0.0
    )
    label = ndimage.rotate(
        sample.label, angle_degrees, reshape=False, order=0, mode="constant", cval=0
    )
    return Sample(image=np.clip(image, 0.0, 1.0), label=label.astype(np.int64))


def augment(sample, rng):
    """Random horizontal flip (p=0.5) then rotation uniform in [-90, 90] degrees."""
    if rng.random() < 0.5:
        sample = apply_flip(sample)
    angle = rng.uniform(-90.0, 90.0)
    return apply_rotation(sample, angle)


def save_dataset(path, samples, num_classes):
    if num_classes < 2 or num_classes > 256:
        raise ConfigurationError(f"num_classes must be in [2, 256] for uint8 labels, got {num_classes}")
    if samples:
        height, width = samples[0].image.shape
    else:
        height = width = 0
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(f"{len(samples)} {height} {width} {num_classes}\n".encode("ascii"))
        for i, sample in enumerate(samples):
            if sample.image.shape != (height, width) or sample.label.shape != (height, width):
                raise DataError(f"sample {i} shape differs from header {height}x{width}")
            if sample.label.size and (sample.label.min() < 0 or sample.label.max() >= num_classes):
                raise DataError(f"sample {i} labels outside [0, {num_classes})")
            fh.write(sample.image.astype("<f4").tobytes())
            fh.write(sample.label.astype(np.uint8).tobytes())


def load_dataset(path):
    """Returns (samples, num_classes); raises FormatError with a byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(DATASET_MAGIC):
        raise FormatError("bad dataset magic", offset=0)
    offset = len(DATASET_MAGIC)
    newline = blob.find(b"\n", offset)
    if newline < 0:
        raise FormatError("missing dataset header line", offset=offset)
    fields = blob[offset:newline].split()
    if len(fields) != 4:
        raise FormatError(f"expected 4 header fields, got {len(fields)}", offset=offset)
    try:
        num_samples, height, width, num_classes = (int(f) for f in fields)
    except ValueError as exc:
        raise FormatError(f"non-integer header field: {exc}", offset=offset) from None
    if num_samples < 0 or height < 0 or width < 0 or num_classes < 2:
        raise FormatError("header fields out of range", offset=offset)
    pixels = height * width
    cursor = newline + 1
    samples = []
    for i in range(num_samples):
        img_bytes = pixels * 4
        chunk = blob[cursor : cursor + img_bytes]
        if len(chunk) != img_bytes:
            raise FormatError(
                f"truncated image payload in sample {i}: wanted {img_bytes} bytes, found {len(chunk)}",
                offset=cursor,
            )
        image = np.frombuffer(chunk, dtype="<f4").reshape(height, width).astype(np.float64)
        cursor += img_bytes
        chunk = blob[cursor : cursor + pixels]
        if len(chunk) != pixels:
            raise FormatError(
                f"truncated label payload in sample {i}: wanted {pixels} bytes, found {len(chunk)}",
                offset=cursor,
            )
        label = np.frombuffer(chunk, dtype=np.uint8).reshape(height, width).astype(np.int64)
        if label.size and label.max() >= num_classes:
            raise FormatError(f"sample {i} labels exceed num_classes {num_classes}", offset=cursor)
        cursor += pixels
        samples.append(Sample(image=image, label=label))
    if cursor != len(blob):
        raise FormatError(f"{len(blob) - cursor} trailing bytes after payload", offset=cursor)
    return samples, num_classes


def split_indices(num_samples, fractions, seed):
    """Deterministic shuffled train/val/test index split."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0.0 for f in fractions):
        raise ConfigurationError(f"need 3 positive split fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_samples)
    n_train = int(round(fractions[0] * num_samples))
    n_val = int(round(fractions[1] * num_samples))
    if n_train + n_val > num_samples:
        raise ConfigurationError("split fractions leave no test samples")
    return perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :]
