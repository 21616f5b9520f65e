"""Capture -> spectrogram -> features -> classifier -> per-channel verdict."""
from __future__ import annotations

import io
import json
import struct
import threading
import time
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np
import scipy.fft as sfft
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import norm

from .spectrum import CLASS_ORDER, ChannelId, SignalClass
from .waveforms import (
    DEFAULT_SAMPLE_RATE_HZ, IqBuffer, SynthConfig, random_augment, synth_channel,
)

FFT_SIZE = 1024
OVERLAP = 0.5
HOP = int(FFT_SIZE * (1 - OVERLAP))
FLOOR_DB = -120.0
FLOOR_LIN = 10 ** (FLOOR_DB / 10)

THETA_SENSE = 0.85

MIN_EXAMPLES_PER_CLASS = 25
MAX_EPOCHS = 500
GRAD_TOL = 1e-6


class BufferTooShort(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class InvalidPfa(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


class Spectrogram:
    """Log-magnitude STFT grid, ``bins[frame, fft_bin]`` in dB (natural FFT order).

    Built from linear bin power; the dB grid is materialized on first access.
    """

    fft_size = FFT_SIZE
    overlap = OVERLAP
    window = "hanning"

    def __init__(self, power: np.ndarray):
        self.power = np.maximum(power, FLOOR_LIN, out=power if power.dtype.kind == "f" else None)

    @classmethod
    def from_db(cls, bins) -> "Spectrogram":
        return cls(10 ** (np.asarray(bins, dtype=float) / 10))

    @cached_property
    def bins(self) -> np.ndarray:
        return 10.0 * np.log10(self.power)

    @property
    def frames(self) -> int:
        return self.power.shape[0]


def frame_count(n: int) -> int:
    if n < FFT_SIZE:
        raise BufferTooShort(f"need at least {FFT_SIZE} samples, got {n}")
    return (n - FFT_SIZE) // HOP + 1


# Window scaled so unit-power white noise lands at 0 dB per bin.
_WINDOW = np.hanning(FFT_SIZE)
_WINDOW_NORM = (_WINDOW / np.sqrt(np.sum(_WINDOW ** 2))).astype(np.float32)


def spectrogram(buf: IqBuffer) -> Spectrogram:
    """Hanning-windowed 1024-point STFT at 50% overlap, single precision."""
    x = np.asarray(buf.samples).astype(np.complex64, copy=False)
    frame_count(len(x))
    frames = sliding_window_view(x, FFT_SIZE)[::HOP]
    spec = sfft.fft(frames * _WINDOW_NORM, axis=1, overwrite_x=True)
    power = np.abs(spec)
    return Spectrogram(np.square(power, out=power))


@dataclass(frozen=True)
class FeatureVector:
    total_energy_db: float
    spectral_flatness: float
    occupied_bw_hz: float
    peak_to_mean_db: float
    temporal_duty: float
    spectral_kurtosis: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def extract_features(sg: Spectrogram, sample_rate_hz: float,
                     noise_power: float = 1.0) -> FeatureVector:
    """Hand-built features on the time-averaged and per-frame spectra.

    ``noise_power`` is the calibrated receiver noise power per sample; the
    synthetic captures use unit noise. Occupied bandwidth and duty cycle count
    power standing more than 3 dB above that floor.
    """
    power = sg.power
    n_frames = power.shape[0]
    m1 = power.sum(axis=0).astype(np.float64) / n_frames
    avg = np.fft.fftshift(m1)
    bin_hz = sample_rate_hz / sg.fft_size

    total_energy_db = 10 * np.log10(avg.mean())
    flatness = float(np.exp(np.mean(np.log(avg))) / avg.mean())
    peak_to_mean_db = 10 * np.log10(avg.max() / avg.mean())

    noise = noise_power
    excess = np.maximum(avg - 2.0 * noise, 0.0)
    if excess.sum() > 0:
        cum = np.cumsum(excess) / excess.sum()
        lo = int(np.searchsorted(cum, 0.005))
        hi = int(np.searchsorted(cum, 0.995))
        occupied_bw = (hi - lo + 1) * bin_hz
    else:
        occupied_bw = 0.0

    frame_mean = power.mean(axis=1)
    duty = float(np.mean(frame_mean > 2.0 * noise))

    # Power-weighted mean of per-bin spectral kurtosis across frames.
    m2 = np.einsum("ij,ij->j", power, power).astype(np.float64) / n_frames
    sk = m2 / m1 ** 2 - 2.0
    kurtosis = float(np.sum(sk * m1) / np.sum(m1))

    return FeatureVector(float(total_energy_db), min(max(flatness, 0.0), 1.0), float(occupied_bw),
                         float(peak_to_mean_db), duty, kurtosis)


def features_of(buf: IqBuffer, noise_power: float = 1.0) -> FeatureVector:
    return extract_features(spectrogram(buf), buf.sample_rate_hz, noise_power)


class Classifier(Protocol):
    classes: tuple[SignalClass, ...]

    def predict_proba(self, features: FeatureVector) -> np.ndarray: ...


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class LogisticModel:
    """Multinomial logistic regression over standardized features."""
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    classes: tuple[SignalClass, ...] = CLASS_ORDER
    seed: int = 0
    descriptor: str = ""

    def predict_proba(self, features: FeatureVector | np.ndarray) -> np.ndarray:
        x = features.as_array() if isinstance(features, FeatureVector) else np.asarray(features, float)
        z = ((x - self.mean) / self.scale) @ self.weights.T + self.bias
        return _softmax(z)

    @classmethod
    def uniform(cls) -> "LogisticModel":
        d = len(FeatureVector.names())
        return cls(np.zeros((len(CLASS_ORDER), d)), np.zeros(len(CLASS_ORDER)),
                   np.zeros(d), np.ones(d), descriptor="uniform")


def _as_matrix(dataset) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for feat, label in dataset:
        xs.append(feat.as_array() if isinstance(feat, FeatureVector) else np.asarray(feat, float))
        ys.append(CLASS_ORDER.index(SignalClass.parse(label)))
    return np.array(xs, dtype=float).reshape(len(xs), -1), np.array(ys, dtype=int)


def train_classifier(dataset: Sequence[tuple[FeatureVector, SignalClass]], seed: int = 0,
                     learning_rate: float = 1.0, l2: float = 1e-4,
                     max_epochs: int = MAX_EPOCHS, descriptor: str = "") -> LogisticModel:
    """Full-batch gradient descent on the regularized cross-entropy.

    Stops when the gradient norm falls below 1e-6 or after ``max_epochs``.
    """
    x, y = _as_matrix(dataset)
    present, counts = np.unique(y, return_counts=True)
    if len(present) < 2 or counts.min() < MIN_EXAMPLES_PER_CLASS:
        raise InsufficientData(
            f"need >= {MIN_EXAMPLES_PER_CLASS} examples for each of at least two classes")
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    xs = (x - mean) / scale
    n, d = xs.shape
    k = len(CLASS_ORDER)
    onehot = np.eye(k)[y]

    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, (k, d))
    b = np.zeros(k)
    for _ in range(max_epochs):
        p = _softmax(xs @ w.T + b)
        err = (p - onehot) / n
        gw = err.T @ xs + l2 * w
        gb = err.sum(axis=0)
        if np.sqrt(np.sum(gw ** 2) + np.sum(gb ** 2)) < GRAD_TOL:
            break
        w -= learning_rate * gw
        b -= learning_rate * gb
    return LogisticModel(w, b, mean, scale, CLASS_ORDER, seed, descriptor)


def classify(model: Classifier, features: FeatureVector) -> tuple[SignalClass, float]:
    p = model.predict_proba(features)
    i = int(np.argmax(p))
    return model.classes[i], float(p[i])


def energy_threshold(noise_power: float, p_fa: float, n: int) -> float:
    """CFAR threshold on mean power, Gaussian approximation to the chi-square statistic."""
    if not 0.0 < p_fa < 1.0:
        raise InvalidPfa(f"p_fa must lie in (0, 1), got {p_fa}")
    if noise_power <= 0:
        raise ValueError("noise power must be positive")
    return noise_power * (1.0 + norm.isf(p_fa) / np.sqrt(n))


def energy_detect(buf: IqBuffer | np.ndarray, noise_power: float, p_fa: float) -> bool:
    x = buf.samples if isinstance(buf, IqBuffer) else np.asarray(buf)
    return bool(mean_power(x) > energy_threshold(noise_power, p_fa, len(x)))


def mean_power(x: np.ndarray) -> float:
    if x.dtype in (np.complex64, np.complex128) and x.flags.c_contiguous:
        # interleaved I/Q as one real vector; a dot product avoids temporaries
        v = x.view(np.float32 if x.dtype == np.complex64 else np.float64)
        return float(np.dot(v, v)) / len(x)
    return float(np.mean(np.abs(x) ** 2))


@dataclass(frozen=True)
class SensingVerdict:
    channel: ChannelId | None
    signal_class: SignalClass
    confidence: float
    occupied: bool
    decided_at: float
    decision_latency: float = 0.0

    def to_record(self) -> dict:
        return {
            "channel": self.channel,
            "class": self.signal_class.value,
            "confidence": self.confidence,
            "occupied": self.occupied,
            "decided_at": self.decided_at,
            "decision_latency_s": self.decision_latency,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "SensingVerdict":
        return cls(rec["channel"], SignalClass.parse(rec["class"]), float(rec["confidence"]),
                   bool(rec["occupied"]), float(rec["decided_at"]),
                   float(rec.get("decision_latency_s", 0.0)))


def is_candidate(verdict: SensingVerdict | None, theta: float = THETA_SENSE) -> bool:
    """Vacant with confidence at or above ``theta``."""
    return (verdict is not None and verdict.signal_class is SignalClass.VACANT
            and verdict.confidence >= theta)


def candidate_channels(verdicts: Iterable[SensingVerdict], theta: float = THETA_SENSE) -> list:
    return [v.channel for v in verdicts if is_candidate(v, theta)]


def sense_channel(buf: IqBuffer, model: Classifier, theta: float = THETA_SENSE,
                  channel: ChannelId | None = None, clock=time.perf_counter) -> SensingVerdict:
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    start = clock()
    cls, conf = classify(model, features_of(buf))
    latency = clock() - start
    return SensingVerdict(channel, cls, conf, cls.occupied, buf.capture_time, latency)


# -- datasets ---------------------------------------------------------------

def make_dataset(n_per_class: int, snr_db: float = 15.0, seed: int = 0,
                 duration_s: float = 0.002, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
                 augment: bool = True, snr_jitter_db: float = 0.0):
    """Labeled feature vectors drawn from the synthetic waveform generators."""
    rng = np.random.default_rng(seed)
    out = []
    for cls in CLASS_ORDER:
        for _ in range(n_per_class):
            snr = snr_db + (rng.uniform(-snr_jitter_db, snr_jitter_db) if snr_jitter_db else 0.0)
            buf = synth_channel(SynthConfig(cls, snr, duration_s, int(rng.integers(2 ** 63))),
                                sample_rate_hz)
            if augment:
                buf = random_augment(buf, rng)
            out.append((features_of(buf), cls))
    return out


def shuffled(dataset, seed: int = 0):
    order = np.random.default_rng(seed).permutation(len(dataset))
    return [dataset[i] for i in order]


def accuracy(model: Classifier, dataset) -> float:
    if not dataset:
        return float("nan")
    hits = sum(classify(model, f)[0] is SignalClass.parse(lbl) for f, lbl in dataset)
    return hits / len(dataset)


# -- model persistence ------------------------------------------------------
#
# magic b"TVCM" | version u16 | n_classes u16 | per class: u16 length + UTF-8 name
# | n_features u16 | seed i64 | u32 length + UTF-8 descriptor
# | mean, scale (n_features f64 each) | weights (n_classes x n_features f64, row-major)
# | bias (n_classes f64). Little-endian throughout.

MODEL_MAGIC = b"TVCM"
MODEL_VERSION = 1


def dump_model(model: LogisticModel) -> bytes:
    out = io.BytesIO()
    k, d = model.weights.shape
    out.write(MODEL_MAGIC + struct.pack("<HH", MODEL_VERSION, k))
    for cls in model.classes:
        name = cls.value.encode()
        out.write(struct.pack("<H", len(name)) + name)
    desc = model.descriptor.encode()
    out.write(struct.pack("<HqI", d, model.seed, len(desc)) + desc)
    for arr in (model.mean, model.scale, model.weights, model.bias):
        out.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return out.getvalue()


def load_model(data: bytes) -> LogisticModel:
    view = io.BytesIO(data)

    def take(n):
        chunk = view.read(n)
        if len(chunk) != n:
            raise ModelFormatError("truncated model file")
        return chunk

    if take(4) != MODEL_MAGIC:
        raise ModelFormatError("not a classifier model file")
    version, k = struct.unpack("<HH", take(4))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    classes = []
    for _ in range(k):
        (length,) = struct.unpack("<H", take(2))
        classes.append(SignalClass.parse(take(length).decode()))
    d, seed, dlen = struct.unpack("<HqI", take(14))
    descriptor = take(dlen).decode()

    def arr(count, shape):
        return np.frombuffer(take(8 * count), dtype="<f8").astype(float).reshape(shape)

    mean, scale = arr(d, (d,)), arr(d, (d,))
    weights, bias = arr(k * d, (k, d)), arr(k, (k,))
    return LogisticModel(weights, bias, mean, scale, tuple(classes), seed, descriptor)


def save_model(model: LogisticModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def read_model(path) -> LogisticModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())


def default_model(seed: int = 0, n_per_class: int = 500, snr_db: float = 15.0,
                  duration_s: float = 0.002) -> LogisticModel:
    """Train the reference feature classifier on synthetic data. Memoized per argument set."""
    key = (seed, n_per_class, snr_db, duration_s)
    if key not in _MODEL_CACHE:
        data = make_dataset(n_per_class, snr_db, seed, duration_s, snr_jitter_db=0.0)
        _MODEL_CACHE[key] = train_classifier(
            shuffled(data, seed), seed,
            descriptor=f"synthetic n={n_per_class}/class snr={snr_db}dB dur={duration_s}s")
    return _MODEL_CACHE[key]


_MODEL_CACHE: dict = {}


# -- verdict stream ---------------------------------------------------------

VERDICT_FIELDS = ("channel", "class", "confidence", "occupied", "decided_at", "decision_latency_s")


def write_verdicts(fh, verdicts: Iterable[SensingVerdict], include_timing: bool = True) -> None:
    """One JSON object per line, keys in ``VERDICT_FIELDS`` order.

    Without ``include_timing`` the wall-clock latency is dropped so the stream
    is reproducible.
    """
    for v in verdicts:
        rec = v.to_record()
        if not include_timing:
            del rec["decision_latency_s"]
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_verdicts(fh) -> list[SensingVerdict]:
    return [SensingVerdict.from_record(json.loads(line)) for line in fh if line.strip()]


class VerdictMailbox:
    """Latest-wins store of per-channel verdicts; producers never block."""

    def __init__(self):
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self._latest: dict = {}
        self._seq = 0

    def put(self, verdict: SensingVerdict) -> None:
        with self._ready:
            self._latest[verdict.channel] = verdict
            self._seq += 1
            self._ready.notify_all()

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._latest)

    def wait_for(self, seq: int, timeout: float | None = None) -> int:
        with self._ready:
            self._ready.wait_for(lambda: self._seq > seq, timeout)
            return self._seq


@dataclass
class SensingService:
    """Runs the sensing pipeline over every channel at a fixed cadence."""
    capture: Callable[[float], Mapping[ChannelId, IqBuffer]]
    model: Classifier
    mailbox: VerdictMailbox = field(default_factory=VerdictMailbox)
    theta: float = THETA_SENSE
    cadence_s: float = 1.0
    _stop: threading.Event = field(default_factory=threading.Event, init=False)
    _thread: threading.Thread | None = field(default=None, init=False)

    def sense_once(self, t: float) -> list[SensingVerdict]:
        out = []
        for ch, buf in sorted(self.capture(t).items()):
            v = sense_channel(buf, self.model, self.theta, channel=ch)
            self.mailbox.put(v)
            out.append(v)
        return out

    def start(self) -> "SensingService":
        def loop():
            t0 = time.monotonic()
            k = 0
            while not self._stop.is_set():
                self.sense_once(time.monotonic() - t0)
                k += 1
                self._stop.wait(max(0.0, t0 + k * self.cadence_s - time.monotonic()))

        self._thread = threading.Thread(target=loop, name="sensing", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
