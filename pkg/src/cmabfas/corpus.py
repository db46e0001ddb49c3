"""Synthetic labeled SIP-header corpus.

Each class gets a template: ``fixed`` slots carry a class-wide constant value
(think user-agent string or preferred codec of a particular dialer), the other
slots are drawn from per-class pools. A few ``shared`` slots draw from one pool
common to every class (callee addresses, ports), which is the only place two
headers of different classes can agree.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .context import (
    ATTRIBUTE_NAMES,
    CLASS_LABELS,
    N_ATTRIBUTES,
    CallClass,
    LabeledCall,
    SipHeader,
)

CORPUS_FORMAT = "cmabfas-corpus"
CORPUS_VERSION = 1

DEFAULT_COUNTS = {"normal": 5609, "spitter": 870, "honeypot": 6, "warvox": 80, "voipbot": 1861}
DEFAULT_POOL_SIZES = {"normal": 400, "spitter": 10, "honeypot": 3, "warvox": 6, "voipbot": 25}


@dataclass(frozen=True)
class ClassTemplate:
    fixed: int = 6
    pool_size: int = 10


def _default_templates() -> dict[str, ClassTemplate]:
    return {label: ClassTemplate(6, DEFAULT_POOL_SIZES[label]) for label in CLASS_LABELS}


@dataclass(frozen=True)
class CorpusSpec:
    counts: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    templates: dict[str, ClassTemplate] = field(default_factory=_default_templates)
    shared_slots: int = 4
    shared_pool_size: int = 60
    seed: int = 0

    def validate(self) -> None:
        for label, count in self.counts.items():
            CallClass(label)
            if count < 0:
                raise ValueError(f"negative count for class {label!r}: {count}")
        for label, tpl in self.templates.items():
            CallClass(label)
            if not 0 <= tpl.fixed <= N_ATTRIBUTES:
                raise ValueError(f"fixed attribute count for {label!r} must be in [0, 16], got {tpl.fixed}")
            if tpl.pool_size < 1:
                raise ValueError(f"pool size for {label!r} must be positive")
        if not 0 <= self.shared_slots <= N_ATTRIBUTES:
            raise ValueError("shared_slots must be in [0, 16]")
        if self.shared_pool_size < 1:
            raise ValueError("shared_pool_size must be positive")

    def template(self, label: str) -> ClassTemplate:
        return self.templates.get(label, ClassTemplate(6, DEFAULT_POOL_SIZES[label]))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CorpusSpec:
        templates = _default_templates()
        fixed_all = data.get("fixed")
        if fixed_all is not None:
            templates = {k: ClassTemplate(int(fixed_all), v.pool_size) for k, v in templates.items()}
        for label, tpl in (data.get("templates") or {}).items():
            base = templates.get(label, ClassTemplate())
            templates[label] = ClassTemplate(
                int(tpl.get("fixed", base.fixed)), int(tpl.get("pool_size", base.pool_size))
            )
        spec = cls(
            counts={k: int(v) for k, v in data.get("counts", DEFAULT_COUNTS).items()},
            templates=templates,
            shared_slots=int(data.get("shared_slots", 4)),
            shared_pool_size=int(data.get("shared_pool_size", 60)),
            seed=int(data.get("seed", 0)),
        )
        spec.validate()
        return spec

    def to_dict(self) -> dict[str, Any]:
        return {
            "counts": dict(self.counts),
            "templates": {k: {"fixed": v.fixed, "pool_size": v.pool_size} for k, v in self.templates.items()},
            "shared_slots": self.shared_slots,
            "shared_pool_size": self.shared_pool_size,
            "seed": self.seed,
        }

    @classmethod
    def load(cls, path: str | Path) -> CorpusSpec:
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_corpus(spec: CorpusSpec) -> list[LabeledCall]:
    spec.validate()
    rng = random.Random(spec.seed)
    slots = list(range(N_ATTRIBUTES))
    shared = set(rng.sample(slots, spec.shared_slots))

    calls: list[LabeledCall] = []
    for label in CLASS_LABELS:
        count = spec.counts.get(label, 0)
        tpl = spec.template(label)
        # Fixed slots prefer positions outside the shared set.
        private = [s for s in slots if s not in shared]
        common = sorted(shared)
        rng.shuffle(private)
        rng.shuffle(common)
        fixed_slots = set((private + common)[: tpl.fixed])
        signature = {
            s: f"{label}:{ATTRIBUTE_NAMES[s]}:{rng.getrandbits(32):08x}" for s in sorted(fixed_slots)
        }
        cls = CallClass(label)
        for _ in range(count):
            values = []
            for s in slots:
                if s in fixed_slots:
                    values.append(signature[s])
                elif s in shared:
                    values.append(f"shared:{ATTRIBUTE_NAMES[s]}:{rng.randrange(spec.shared_pool_size)}")
                else:
                    values.append(f"{label}:{ATTRIBUTE_NAMES[s]}:{rng.randrange(tpl.pool_size)}")
            calls.append(LabeledCall(SipHeader(tuple(values)), cls))
    return calls


def draw_call(corpus: Sequence[LabeledCall], rng: random.Random) -> LabeledCall:
    if not corpus:
        raise ValueError("cannot draw from an empty corpus")
    return corpus[rng.randrange(len(corpus))]


def write_corpus(corpus: Sequence[LabeledCall], path: str | Path) -> None:
    lines = [f"# {CORPUS_FORMAT} v{CORPUS_VERSION}"]
    for call in corpus:
        for value in call.header.attributes:
            if "\t" in value or "\n" in value or "\r" in value:
                raise ValueError(f"attribute {value!r} cannot be stored in a tab-separated corpus")
        lines.append("\t".join((call.call_class.label,) + call.header.attributes))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_corpus(path: str | Path) -> list[LabeledCall]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or lines[0] != f"# {CORPUS_FORMAT} v{CORPUS_VERSION}":
        raise ValueError(f"{path}: not a {CORPUS_FORMAT} v{CORPUS_VERSION} file")
    classes = {label: CallClass(label) for label in CLASS_LABELS}
    corpus = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != N_ATTRIBUTES + 1:
            raise ValueError(f"{path}:{lineno}: expected {N_ATTRIBUTES + 1} fields, got {len(fields)}")
        if fields[0] not in classes:
            raise ValueError(f"{path}:{lineno}: unknown class {fields[0]!r}")
        corpus.append(LabeledCall(SipHeader(tuple(fields[1:])), classes[fields[0]]))
    return corpus
